#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cbf/types.hpp"

namespace cbf {

/// Axis-aligned box over (q, qdot), used for bound estimation and sampling.
struct StateBox {
  Vec q_lo, q_hi;
  Vec qdot_lo, qdot_hi;

  int dof() const { return static_cast<int>(q_lo.size()); }
  bool contains(const State& s) const;
};

/// Task-space output y(q) and its Jacobian.
struct TaskPoint {
  Vec x;
  Mat jacobian;
};

using ParamMap = std::map<std::string, double>;

/// Rigid-body model D(q) qdd + C(q, qd) qd + G(q) = B u with a task map y(q).
///
/// The public members validate their arguments (finite, right size) and
/// forward to the model-specific implementation. Models are immutable once
/// built and may be shared between threads.
class RobotModel {
 public:
  virtual ~RobotModel() = default;

  virtual std::string_view name() const = 0;
  /// Configuration dimension k.
  virtual int dof() const = 0;
  /// Input dimension m.
  virtual int inputs() const = 0;
  /// Task dimension n.
  virtual int task_dim() const = 0;

  Mat mass_matrix(const Vec& q) const;
  /// Time derivative of D(q) along qdot.
  Mat mass_matrix_rate(const Vec& q, const Vec& qdot) const;
  Mat coriolis_matrix(const Vec& q, const Vec& qdot) const;
  Vec gravity_vector(const Vec& q) const;
  double potential_energy(const Vec& q) const;
  double kinetic_energy(const State& s) const;
  Mat actuation_matrix(const Vec& q) const;
  Vec forward_dynamics(const State& s, const Vec& u) const;
  TaskPoint task_map(const Vec& q) const;
  /// Hessians of the task coordinates, one k x k matrix per output.
  std::vector<Mat> task_hessians(const Vec& q) const;

  bool gravity_enabled() const { return gravity_enabled_; }
  /// Default sampling box (angles, positions and velocities).
  virtual StateBox default_box() const = 0;
  /// Physical constants, keyed by their configuration names.
  virtual ParamMap params() const = 0;

 protected:
  explicit RobotModel(bool gravity_enabled) : gravity_enabled_(gravity_enabled) {}

  virtual Mat do_mass_matrix(const Vec& q) const = 0;
  virtual Mat do_mass_matrix_rate(const Vec& q, const Vec& qdot) const = 0;
  virtual Mat do_coriolis(const Vec& q, const Vec& qdot) const = 0;
  virtual Vec do_gravity(const Vec& q) const = 0;
  virtual double do_potential(const Vec& q) const = 0;
  virtual Mat do_actuation(const Vec& q) const = 0;
  virtual TaskPoint do_task_map(const Vec& q) const = 0;
  virtual std::vector<Mat> do_task_hessians(const Vec& q) const = 0;

 private:
  void check_config(const Vec& q) const;
  void check_velocity(const Vec& qdot) const;

  bool gravity_enabled_;
};

using ModelPtr = std::shared_ptr<const RobotModel>;

struct DoubleIntegratorParams {
  double mass = 1.0;  // kg
};

/// Planar two-link revolute arm, point masses at the link tips, angles
/// measured from the horizontal; gravity acts along -y.
struct TwoLinkArmParams {
  double m1 = 1.0;   // kg
  double m2 = 1.0;   // kg
  double l1 = 1.0;   // m
  double l2 = 1.0;   // m
  double g = 9.81;   // m/s^2
};

/// Cart-pole with a point-mass pole; theta = 0 hangs down, theta = pi is
/// upright. q = (x, theta), force acts on the cart.
struct CartPoleParams {
  double cart_mass = 1.0;    // kg
  double pole_mass = 0.2;    // kg
  double pole_length = 0.5;  // m
  double g = 9.81;           // m/s^2
};

ModelPtr make_double_integrator(const DoubleIntegratorParams& p = {}, bool gravity = true);
ModelPtr make_two_link_arm(const TwoLinkArmParams& p = {}, bool gravity = true);
ModelPtr make_cart_pole(const CartPoleParams& p = {}, bool gravity = true);

/// Builds a model by id ("double_integrator", "two_link_arm", "cart_pole").
/// Unknown ids or parameter names raise ParameterError. The key "gravity"
/// (0/1) toggles the gravity switch.
ModelPtr make_model(std::string_view id, const ParamMap& overrides = {});

/// Valid model ids, in a stable order.
const std::vector<std::string>& model_ids();

}  // namespace cbf
