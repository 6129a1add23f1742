#include "cbf/filter.hpp"

#include <cmath>
#include <utility>

#include "cbf/errors.hpp"
#include "cbf/thresholds.hpp"

namespace cbf {

namespace {

double maybe_flip(double psi, FaultInjection fault) { return fault.flip_psi_sign ? -psi : psi; }

// u_des + direction * psi / |direction|^2 when psi < 0.
Vec correct_along(const Vec& u_des, const Vec& direction, double psi) {
  return u_des + direction * (psi / direction.squaredNorm());
}

struct ReducedTerms {
  double h = 0.0;
  double hdot = 0.0;
  RowVec jh;
  bool degenerate = false;  // Phi singular because J_h vanishes; hdot ~ 0
  SchurReduction red;
};

ReducedTerms reduce(const UnderactuatedBarrier& b, const State& s) {
  ReducedTerms t;
  t.h = b.kin.value(s.q);
  t.jh = b.kin.gradient(s.q);
  t.hdot = t.jh.dot(s.qdot);
  try {
    t.red = schur_reduce(*b.model, b.kin, b.complement, s.q, s.qdot);
  } catch (const DiffeomorphismError&) {
    if (t.jh.norm() >= kDegenerateGradient) throw;
    t.degenerate = true;
  }
  return t;
}

double h_hat_from(const ReducedTerms& t, double alpha_e) {
  if (t.degenerate || t.hdot == 0.0) return alpha_e * t.h;
  return -0.5 * t.hdot * t.red.D_h * t.hdot + alpha_e * t.h;
}

// Lf and Lg of the exact underactuated constraint.
std::pair<double, RowVec> exact_underactuated_terms(const ReducedTerms& t, const State& s,
                                                    double alpha_e, int m) {
  if (t.degenerate) return {0.0, RowVec::Zero(m)};
  const double hd = t.hdot;
  const double lf = -0.5 * hd * t.red.D_h_rate * hd + hd * (t.red.C_h.dot(s.qdot) + t.red.G_h) +
                    alpha_e * hd;
  return {lf, -hd * t.red.B_h};
}

std::pair<double, RowVec> robust_underactuated_terms(const ReducedTerms& t, const State& s,
                                                     double alpha_e, int m,
                                                     UnderactuatedBounds bounds) {
  if (t.degenerate) return {0.0, RowVec::Zero(m)};
  const double hd = t.hdot;
  const double v = s.qdot.norm();
  const double lf = -0.5 * bounds.c_l * hd * hd - 0.5 * bounds.c_u * v * hd * hd -
                    bounds.c_u * std::abs(hd) * (v * v + 1.0) + alpha_e * hd;
  return {lf, -hd * t.red.B_h};
}

void check_bounds(UnderactuatedBounds bounds) {
  if (!(bounds.c_l > 0.0) || !(bounds.c_u >= bounds.c_l) || !std::isfinite(bounds.c_u))
    throw BoundError("underactuated bounds need 0 < c_l <= c_u < inf");
}

FilterOutput underactuated_from_terms(double lf, const RowVec& lg, double barrier_for_alpha,
                                      const ClassKappa& a, const Vec& u_des, FaultInjection fault,
                                      double certified) {
  FilterOutput out;
  try {
    out = explicit_cbf_qp(lf, lg, barrier_for_alpha, a, u_des, fault);
  } catch (const InfeasibleError& e) {
    if (certified >= 0.0)
      throw ContractError(std::string("underactuated filter: ") + e.what());
    throw;
  }
  out.barrier = certified;
  out.outside_safe_set = certified < 0.0;
  return out;
}

}  // namespace

FilterOutput explicit_cbf_qp(double lf, const RowVec& lg, double h, const ClassKappa& a,
                             const Vec& u_des, FaultInjection fault) {
  if (lg.size() != u_des.size()) throw DomainError("explicit_cbf_qp: Lg and u_des sizes differ");
  const double alpha_h = a(h);
  FilterOutput out;
  out.barrier = h;
  out.psi = maybe_flip(lf + lg.dot(u_des) + alpha_h, fault);
  out.intervened = out.psi < 0.0;
  if (lg.norm() < kDegenerateGradient) {
    if (lf + alpha_h < 0.0)
      throw InfeasibleError("Lg h vanishes while Lf h + alpha(h) < 0");
    out.command = u_des;
  } else if (out.intervened) {
    out.command = u_des - lg.transpose() * (out.psi / lg.squaredNorm());
  } else {
    out.command = u_des;
  }
  out.constraint_residual = lf + lg.dot(out.command) + alpha_h;
  out.outside_safe_set = h < 0.0;
  return out;
}

TrackingTask setpoint_task(Vec target, double lambda, bool joint_space) {
  if (!(lambda > 0.0)) throw ParameterError("tracking gain must be positive");
  const int n = static_cast<int>(target.size());
  TrackingTask task;
  task.x_d = [target](double) { return target; };
  task.xdot_d = [n](double) { return Vec::Zero(n).eval(); };
  task.lambda = lambda;
  task.joint_space = joint_space;
  return task;
}

TrackingTask line_task(Vec start, Vec velocity, double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("tracking gain must be positive");
  if (start.size() != velocity.size()) throw ParameterError("line task: size mismatch");
  TrackingTask task;
  task.x_d = [start, velocity](double t) { return (start + velocity * t).eval(); };
  task.xdot_d = [velocity](double) { return velocity; };
  task.lambda = lambda;
  return task;
}

TrackingTask circle_task(Vec center, double radius, double omega, double phase, double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("tracking gain must be positive");
  if (center.size() != 2) throw ParameterError("circle task needs a planar center");
  TrackingTask task;
  task.x_d = [=](double t) {
    Vec x(2);
    x << center[0] + radius * std::cos(omega * t + phase),
        center[1] + radius * std::sin(omega * t + phase);
    return x;
  };
  task.xdot_d = [=](double t) {
    Vec v(2);
    v << -radius * omega * std::sin(omega * t + phase), radius * omega * std::cos(omega * t + phase);
    return v;
  };
  task.lambda = lambda;
  return task;
}

Vec tracking_qdot_des(const RobotModel& model, const Vec& q, double t, const TrackingTask& task) {
  if (!(task.lambda > 0.0)) throw ParameterError("tracking gain must be positive");
  TaskPoint tp;
  if (task.joint_space) {
    tp = {q, Mat::Identity(model.dof(), model.dof())};
  } else {
    tp = model.task_map(q);
  }
  const Vec xd = task.x_d(t);
  if (xd.size() != tp.x.size()) throw DomainError("tracking task dimension mismatch");
  const Vec v = task.xdot_d(t) - task.lambda * (tp.x - xd);
  const Mat gram = tp.jacobian * tp.jacobian.transpose();
  Eigen::PartialPivLU<Mat> lu(gram);
  if (std::abs(lu.determinant()) < kPseudoinverseDet)
    throw SingularityError("task Jacobian is singular; pseudoinverse undefined");
  return tp.jacobian.transpose() * lu.solve(v);
}

FilterOutput velocity_filter(const KinematicBarrier& kin, const Vec& q, const ClassKappa& a,
                             const Vec& qdot_des, FaultInjection fault) {
  if (qdot_des.size() != q.size()) throw DomainError("velocity_filter: size mismatch");
  const double h = kin.value(q);
  const RowVec jh = kin.gradient(q);
  FilterOutput out;
  out.barrier = h;
  out.outside_safe_set = h < 0.0;
  out.psi = maybe_flip(jh.dot(qdot_des) + a(h), fault);
  out.intervened = out.psi < 0.0;
  if (out.intervened) {
    const double gram = jh.squaredNorm();
    if (jh.norm() < kDegenerateGradient || gram < kPseudoinverseDet)
      throw SingularityError("velocity_filter: barrier gradient is degenerate");
    // qd* = qd_des - J_h^+ Psi, J_h^+ = J_h^T / (J_h J_h^T).
    out.command = qdot_des - jh.transpose() * (out.psi / gram);
  } else {
    out.command = qdot_des;
  }
  out.constraint_residual = jh.dot(out.command) + a(h);
  return out;
}

double torque_constraint_margin(const EnergyBarrier& b, const State& s, const ClassKappa& a,
                                const Vec& u) {
  return hdot_D(b, s, u) + a(energy_h_D(b, s));
}

FilterOutput torque_filter(const EnergyBarrier& b, const State& s, const ClassKappa& a,
                           const Vec& u_des, FaultInjection fault) {
  const RobotModel& model = *b.model;
  if (u_des.size() != model.inputs()) throw DomainError("torque_filter: input size mismatch");
  const Mat bm = model.actuation_matrix(s.q);
  const Vec g = model.gravity_vector(s.q);
  const RowVec jh = b.kin.gradient(s.q);
  const double hd = energy_h_D(b, s);

  FilterOutput out;
  out.barrier = hd;
  out.outside_safe_set = hd < 0.0;
  // Psi = qd^T (alpha_e J_h^T + G - B u_des) + alpha(h_D)
  out.psi = maybe_flip(
      s.qdot.dot(b.alpha_e * jh.transpose() + g - bm * u_des) + a(hd), fault);
  out.intervened = out.psi < 0.0;
  if (out.intervened) {
    const Vec dir = bm.transpose() * s.qdot;
    if (dir.norm() < kDegenerateGradient)
      throw ContractError("torque_filter: B^T qd vanishes while Psi < 0");
    out.command = correct_along(u_des, dir, out.psi);
  } else {
    out.command = u_des;
  }
  out.constraint_residual = torque_constraint_margin(b, s, a, out.command);
  return out;
}

double robust_torque_constraint_margin(const EnergyBarrier& b, const State& s,
                                       const ClassKappa& a, const Vec& u, double c_u,
                                       GravityMode mode) {
  const RobotModel& model = *b.model;
  const double v2 = s.qdot.squaredNorm();
  const double tightened = -c_u * v2 + b.alpha_e * b.kin.value(s.q);
  double lhs = -s.qdot.dot(model.actuation_matrix(s.q) * u) +
               b.alpha_e * b.kin.gradient(s.q).dot(s.qdot);
  if (mode == GravityMode::keep_gravity)
    lhs += model.gravity_vector(s.q).dot(s.qdot);
  else
    lhs -= c_u * std::sqrt(v2);
  return lhs + a(tightened);
}

FilterOutput robust_torque_filter(const EnergyBarrier& b, const State& s, const ClassKappa& a,
                                  const Vec& u_des, double c_u, GravityMode mode,
                                  FaultInjection fault) {
  if (!(c_u > 0.0) || !std::isfinite(c_u)) throw BoundError("robust_torque_filter: c_u must be positive");
  const RobotModel& model = *b.model;
  if (u_des.size() != model.inputs()) throw DomainError("robust_torque_filter: input size mismatch");
  const Mat bm = model.actuation_matrix(s.q);
  const double hd = energy_h_D(b, s);

  FilterOutput out;
  out.barrier = hd;
  out.outside_safe_set = hd < 0.0;
  out.psi = maybe_flip(robust_torque_constraint_margin(b, s, a, u_des, c_u, mode), fault);
  out.intervened = out.psi < 0.0;
  if (out.intervened) {
    const Vec dir = bm.transpose() * s.qdot;
    if (dir.norm() < kDegenerateGradient)
      throw ContractError("robust_torque_filter: B^T qd vanishes while Psi < 0");
    out.command = correct_along(u_des, dir, out.psi);
  } else {
    out.command = u_des;
  }
  out.constraint_residual = robust_torque_constraint_margin(b, s, a, out.command, c_u, mode);
  return out;
}

Vec low_level_pd(const Vec& qdot, const Vec& qdot_cmd, const Mat& k_vel) {
  if (qdot.size() != qdot_cmd.size() || k_vel.rows() != qdot.size() || k_vel.cols() != qdot.size())
    throw DomainError("low_level_pd: dimension mismatch");
  return -k_vel * (qdot - qdot_cmd);
}

FilterOutput velocity_command_filter(const EnergyBarrier& b, const State& s, const ClassKappa& a,
                                     const Mat& k_vel, const Vec& qdot_des,
                                     bool gravity_precompensation, FaultInjection fault) {
  const RobotModel& model = *b.model;
  const int k = model.dof();
  if (model.inputs() != k) throw DomainError("velocity_command_filter needs a fully actuated model");
  if (k_vel.rows() != k || k_vel.cols() != k || qdot_des.size() != k)
    throw DomainError("velocity_command_filter: dimension mismatch");
  if (!k_vel.isApprox(k_vel.transpose(), 1e-12) || Eigen::LLT<Mat>(k_vel).info() != Eigen::Success)
    throw ParameterError("K_vel must be symmetric positive definite");

  const Mat bm = model.actuation_matrix(s.q);
  const Vec g = model.gravity_vector(s.q);
  const RowVec jh = b.kin.gradient(s.q);
  const double hd = energy_h_D(b, s);
  const Mat bk = bm * k_vel;

  FilterOutput out;
  out.barrier = hd;
  out.outside_safe_set = hd < 0.0;
  // Psi = qd^T (alpha_e J_h^T + B K qd - B K qd_des + G) + alpha(h_D)
  Vec inner = b.alpha_e * jh.transpose() + bk * s.qdot - bk * qdot_des;
  if (!gravity_precompensation) inner += g;
  out.psi = maybe_flip(s.qdot.dot(inner) + a(hd), fault);
  out.intervened = out.psi < 0.0;
  if (out.intervened) {
    const Vec dir = k_vel.transpose() * bm.transpose() * s.qdot;
    if (dir.norm() < kDegenerateGradient)
      throw ContractError("velocity_command_filter: K^T B^T qd vanishes while Psi < 0");
    out.command = correct_along(qdot_des, dir, out.psi);
  } else {
    out.command = qdot_des;
  }

  Vec u = low_level_pd(s.qdot, out.command, k_vel);
  if (gravity_precompensation) u += bm.partialPivLu().solve(g);
  out.constraint_residual = torque_constraint_margin(b, s, a, u);
  return out;
}

double underactuated_constraint_margin(const UnderactuatedBarrier& b, const State& s,
                                       const ClassKappa& a, const Vec& u) {
  const ReducedTerms t = reduce(b, s);
  const auto [lf, lg] = exact_underactuated_terms(t, s, b.alpha_e, b.model->inputs());
  return lf + lg.dot(u) + a(h_hat_from(t, b.alpha_e));
}

double robust_underactuated_constraint_margin(const UnderactuatedBarrier& b, const State& s,
                                              const ClassKappa& a, const Vec& u,
                                              UnderactuatedBounds bounds) {
  check_bounds(bounds);
  const ReducedTerms t = reduce(b, s);
  const auto [lf, lg] = robust_underactuated_terms(t, s, b.alpha_e, b.model->inputs(), bounds);
  const double tightened = -bounds.c_u * t.hdot * t.hdot + b.alpha_e * t.h;
  return lf + lg.dot(u) + a(tightened);
}

FilterOutput underactuated_filter(const UnderactuatedBarrier& b, const State& s,
                                  const ClassKappa& a, const Vec& u_des, FaultInjection fault) {
  if (u_des.size() != b.model->inputs()) throw DomainError("underactuated_filter: input size mismatch");
  const ReducedTerms t = reduce(b, s);
  const double hhat = h_hat_from(t, b.alpha_e);
  const auto [lf, lg] = exact_underactuated_terms(t, s, b.alpha_e, b.model->inputs());
  return underactuated_from_terms(lf, lg, hhat, a, u_des, fault, hhat);
}

FilterOutput robust_underactuated_filter(const UnderactuatedBarrier& b, const State& s,
                                         const ClassKappa& a, const Vec& u_des,
                                         UnderactuatedBounds bounds, FaultInjection fault) {
  check_bounds(bounds);
  if (u_des.size() != b.model->inputs())
    throw DomainError("robust_underactuated_filter: input size mismatch");
  const ReducedTerms t = reduce(b, s);
  const double hhat = h_hat_from(t, b.alpha_e);
  const auto [lf, lg] = robust_underactuated_terms(t, s, b.alpha_e, b.model->inputs(), bounds);
  const double tightened = -bounds.c_u * t.hdot * t.hdot + b.alpha_e * t.h;
  FilterOutput out = underactuated_from_terms(lf, lg, tightened, a, u_des, fault, hhat);
  return out;
}

}  // namespace cbf
