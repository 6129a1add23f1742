#pragma once

#include <functional>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "cbf/models.hpp"
#include "cbf/types.hpp"

namespace cbf {

/// Extended class-K function: linear (gain * s) or cubic (gain * s^3).
struct ClassKappa {
  enum class Kind { linear, cubic };
  Kind kind = Kind::linear;
  double gain = 1.0;

  double operator()(double s) const {
    return kind == Kind::linear ? gain * s : gain * s * s * s;
  }
};

ClassKappa make_class_kappa(ClassKappa::Kind kind, double gain);
inline double alpha_eval(const ClassKappa& a, double s) { return a(s); }

/// End effector at least `radius` away from `center` in task space:
/// h = |y(q) - center|^2 - radius^2.
struct SphereObstacle {
  Vec center;
  double radius = 0.0;
};

/// Keeps coordinate `index` within `width` of `center`:
/// h = width^2 - (q_i - center)^2. index < 0 selects the last coordinate.
struct AngleBox {
  double width = 0.0;
  double center = std::numbers::pi;
  int index = -1;
};

/// |q_i| <= limit: h = limit^2 - q_i^2.
struct PositionBox {
  double limit = 0.0;
  int index = 0;
};

/// One-sided limit on coordinate `index`: h = q_i - bound (lower) or
/// bound - q_i (upper). Its gradient never vanishes.
struct AngleLimit {
  double bound = 0.0;
  bool lower = true;
  int index = -1;
};

using BarrierDescriptor = std::variant<SphereObstacle, AngleBox, PositionBox, AngleLimit>;

std::string describe(const BarrierDescriptor& d);

/// Configuration-only safety constraint h(q) with analytic gradient and
/// Hessian. The safe set is {q : h(q) >= 0}.
class KinematicBarrier {
 public:
  KinematicBarrier(BarrierDescriptor descriptor, ModelPtr model);

  double value(const Vec& q) const;
  /// J_h(q), a 1 x k row.
  RowVec gradient(const Vec& q) const;
  Mat hessian(const Vec& q) const;

  const BarrierDescriptor& descriptor() const { return descriptor_; }
  const RobotModel& model() const { return *model_; }
  const ModelPtr& model_ptr() const { return model_; }

 private:
  int coordinate(int index) const;

  BarrierDescriptor descriptor_;
  ModelPtr model_;
};

/// Validates the descriptor (radius, width, limit > 0; index in range) and
/// builds the barrier with its analytic Jacobian.
KinematicBarrier barrier_catalog(const BarrierDescriptor& descriptor, ModelPtr model);

/// Map w(q) completing h(q) to a local diffeomorphism Phi = (w, h).
struct CoordinateMap {
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> jacobian;   // (k-1) x k
  std::function<Mat(const Vec&, const Vec&)> rate;  // d/dt jacobian along qdot
};

/// w(q) = (q_i for i in indices): linear, so its Jacobian rate is zero.
CoordinateMap select_coordinates(int dof, std::vector<int> indices);

struct EnergyBarrier {
  ModelPtr model;
  KinematicBarrier kin;
  double alpha_e = 1.0;
};

struct UnderactuatedBarrier {
  ModelPtr model;
  KinematicBarrier kin;
  CoordinateMap complement;
  double alpha_e = 1.0;
};

EnergyBarrier make_energy_barrier(KinematicBarrier kin, double alpha_e);
UnderactuatedBarrier make_underactuated_barrier(KinematicBarrier kin, CoordinateMap complement,
                                                double alpha_e);

/// h_D = -1/2 qd^T D(q) qd + alpha_e h(q).
double energy_h_D(const EnergyBarrier& b, const State& s);

/// dh_D/dt along the dynamics: -qd^T B u + G^T qd + alpha_e J_h qd.
double hdot_D(const EnergyBarrier& b, const State& s, const Vec& u);

struct Membership {
  bool in_S = false;
  bool in_S_D = false;
};

Membership membership(const EnergyBarrier& b, const State& s);

/// hhat_D = -1/2 hd D_h(q) hd + alpha_e h(q), hd = J_h qd. When hd is
/// exactly zero the kinetic term vanishes and D_h is not needed.
double underactuated_h_hat(const UnderactuatedBarrier& b, const State& s);

}  // namespace cbf
