#include "cbf/barrier.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "cbf/errors.hpp"
#include "cbf/schur.hpp"

namespace cbf {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

ClassKappa make_class_kappa(ClassKappa::Kind kind, double gain) {
  if (!(gain > 0.0) || !std::isfinite(gain)) throw ParameterError("class-K gain must be positive");
  return {kind, gain};
}

std::string describe(const BarrierDescriptor& d) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const SphereObstacle& s) {
                   os << "sphere_obstacle(center=[";
                   for (int i = 0; i < s.center.size(); ++i) os << (i ? "," : "") << s.center[i];
                   os << "],radius=" << s.radius << ")";
                 },
                 [&](const AngleBox& a) {
                   os << "angle_box(width=" << a.width << ",center=" << a.center
                      << ",index=" << a.index << ")";
                 },
                 [&](const PositionBox& p) {
                   os << "position_box(limit=" << p.limit << ",index=" << p.index << ")";
                 },
                 [&](const AngleLimit& a) {
                   os << "angle_limit(bound=" << a.bound << ",side=" << (a.lower ? "lower" : "upper")
                      << ",index=" << a.index << ")";
                 },
             },
             d);
  return os.str();
}

KinematicBarrier::KinematicBarrier(BarrierDescriptor descriptor, ModelPtr model)
    : descriptor_(std::move(descriptor)), model_(std::move(model)) {
  if (!model_) throw ParameterError("barrier requires a model");
  std::visit(overloaded{
                 [&](const SphereObstacle& s) {
                   if (!(s.radius > 0.0)) throw ParameterError("sphere_obstacle: radius must be positive");
                   if (s.center.size() != model_->task_dim())
                     throw ParameterError("sphere_obstacle: center dimension differs from task dimension");
                 },
                 [&](const AngleBox& a) {
                   if (!(a.width > 0.0)) throw ParameterError("angle_box: width must be positive");
                   coordinate(a.index);
                 },
                 [&](const PositionBox& p) {
                   if (!(p.limit > 0.0)) throw ParameterError("position_box: limit must be positive");
                   coordinate(p.index);
                 },
                 [&](const AngleLimit& a) { coordinate(a.index); },
             },
             descriptor_);
}

int KinematicBarrier::coordinate(int index) const {
  const int k = model_->dof();
  const int i = index < 0 ? k + index : index;
  if (i < 0 || i >= k) throw ParameterError("barrier coordinate index out of range");
  return i;
}

double KinematicBarrier::value(const Vec& q) const {
  return std::visit(overloaded{
                        [&](const SphereObstacle& s) {
                          const Vec r = model_->task_map(q).x - s.center;
                          return r.squaredNorm() - s.radius * s.radius;
                        },
                        [&](const AngleBox& a) {
                          const double e = q[coordinate(a.index)] - a.center;
                          return a.width * a.width - e * e;
                        },
                        [&](const PositionBox& p) {
                          const double x = q[coordinate(p.index)];
                          return p.limit * p.limit - x * x;
                        },
                        [&](const AngleLimit& a) {
                          const double x = q[coordinate(a.index)];
                          return a.lower ? x - a.bound : a.bound - x;
                        },
                    },
                    descriptor_);
}

RowVec KinematicBarrier::gradient(const Vec& q) const {
  const int k = model_->dof();
  return std::visit(overloaded{
                        [&](const SphereObstacle& s) -> RowVec {
                          const TaskPoint tp = model_->task_map(q);
                          const Vec r = tp.x - s.center;
                          return 2.0 * r.transpose() * tp.jacobian;
                        },
                        [&](const AngleBox& a) -> RowVec {
                          const int i = coordinate(a.index);
                          RowVec g = RowVec::Zero(k);
                          g[i] = -2.0 * (q[i] - a.center);
                          return g;
                        },
                        [&](const PositionBox& p) -> RowVec {
                          const int i = coordinate(p.index);
                          RowVec g = RowVec::Zero(k);
                          g[i] = -2.0 * q[i];
                          return g;
                        },
                        [&](const AngleLimit& a) -> RowVec {
                          RowVec g = RowVec::Zero(k);
                          g[coordinate(a.index)] = a.lower ? 1.0 : -1.0;
                          return g;
                        },
                    },
                    descriptor_);
}

Mat KinematicBarrier::hessian(const Vec& q) const {
  const int k = model_->dof();
  return std::visit(overloaded{
                        [&](const SphereObstacle& s) -> Mat {
                          const TaskPoint tp = model_->task_map(q);
                          const Vec r = tp.x - s.center;
                          Mat hess = 2.0 * tp.jacobian.transpose() * tp.jacobian;
                          const auto th = model_->task_hessians(q);
                          for (int i = 0; i < r.size(); ++i) hess += 2.0 * r[i] * th[i];
                          return hess;
                        },
                        [&](const AngleBox& a) -> Mat {
                          Mat hess = Mat::Zero(k, k);
                          const int i = coordinate(a.index);
                          hess(i, i) = -2.0;
                          return hess;
                        },
                        [&](const PositionBox& p) -> Mat {
                          Mat hess = Mat::Zero(k, k);
                          const int i = coordinate(p.index);
                          hess(i, i) = -2.0;
                          return hess;
                        },
                        [&](const AngleLimit&) -> Mat { return Mat::Zero(k, k); },
                    },
                    descriptor_);
}

KinematicBarrier barrier_catalog(const BarrierDescriptor& descriptor, ModelPtr model) {
  return KinematicBarrier(descriptor, std::move(model));
}

CoordinateMap select_coordinates(int dof, std::vector<int> indices) {
  for (int i : indices)
    if (i < 0 || i >= dof) throw ParameterError("coordinate selector index out of range");
  CoordinateMap map;
  map.value = [indices](const Vec& q) {
    Vec w(static_cast<int>(indices.size()));
    for (std::size_t r = 0; r < indices.size(); ++r) w[static_cast<int>(r)] = q[indices[r]];
    return w;
  };
  map.jacobian = [indices, dof](const Vec&) {
    Mat j = Mat::Zero(static_cast<int>(indices.size()), dof);
    for (std::size_t r = 0; r < indices.size(); ++r) j(static_cast<int>(r), indices[r]) = 1.0;
    return j;
  };
  const int rows = static_cast<int>(indices.size());
  map.rate = [rows, dof](const Vec&, const Vec&) { return Mat::Zero(rows, dof); };
  return map;
}

EnergyBarrier make_energy_barrier(KinematicBarrier kin, double alpha_e) {
  if (!(alpha_e > 0.0)) throw ParameterError("alpha_e must be positive");
  ModelPtr model = kin.model_ptr();
  return {std::move(model), std::move(kin), alpha_e};
}

UnderactuatedBarrier make_underactuated_barrier(KinematicBarrier kin, CoordinateMap complement,
                                                double alpha_e) {
  if (!(alpha_e > 0.0)) throw ParameterError("alpha_e must be positive");
  ModelPtr model = kin.model_ptr();
  return {std::move(model), std::move(kin), std::move(complement), alpha_e};
}

double energy_h_D(const EnergyBarrier& b, const State& s) {
  return -b.model->kinetic_energy(s) + b.alpha_e * b.kin.value(s.q);
}

double hdot_D(const EnergyBarrier& b, const State& s, const Vec& u) {
  if (u.size() != b.model->inputs()) throw DomainError("hdot_D: input has wrong size");
  const Mat bm = b.model->actuation_matrix(s.q);
  const Vec g = b.model->gravity_vector(s.q);
  return -s.qdot.dot(bm * u) + g.dot(s.qdot) + b.alpha_e * b.kin.gradient(s.q).dot(s.qdot);
}

Membership membership(const EnergyBarrier& b, const State& s) {
  return {b.kin.value(s.q) >= 0.0, energy_h_D(b, s) >= 0.0};
}

double underactuated_h_hat(const UnderactuatedBarrier& b, const State& s) {
  const double h = b.kin.value(s.q);
  const double hd = b.kin.gradient(s.q).dot(s.qdot);
  if (hd == 0.0) return b.alpha_e * h;
  const SchurReduction red = schur_reduce(*b.model, b.kin, b.complement, s.q, s.qdot);
  return -0.5 * hd * red.D_h * hd + b.alpha_e * h;
}

}  // namespace cbf
