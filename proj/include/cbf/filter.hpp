#pragma once

#include <functional>

#include "cbf/barrier.hpp"
#include "cbf/models.hpp"
#include "cbf/schur.hpp"
#include "cbf/types.hpp"

namespace cbf {

/// Result of one safety-filter evaluation.
struct FilterOutput {
  /// Filtered velocity or torque, depending on the filter.
  Vec command;
  /// Constraint evaluated at the desired input; negative means intervention.
  double psi = 0.0;
  bool intervened = false;
  /// hdot + alpha(h) evaluated at the filtered command.
  double constraint_residual = 0.0;
  /// Value of the barrier the filter certifies (h, h_D or hhat_D).
  double barrier = 0.0;
  /// State was outside the certified safe set; the closed form still applies.
  bool outside_safe_set = false;
};

/// Test hook for the verification suites: flips the sign of Psi before the
/// switch. Never set outside mutation tests.
struct FaultInjection {
  bool flip_psi_sign = false;
};

/// Minimum-norm correction of u_des subject to Lf + Lg u >= -alpha(h).
///   Psi >= 0: u_des;  Psi < 0: u_des - Lg^T Psi / (Lg Lg^T).
/// Throws InfeasibleError when |Lg| is below kDegenerateGradient and the
/// constraint cannot be met.
FilterOutput explicit_cbf_qp(double lf, const RowVec& lg, double h, const ClassKappa& a,
                             const Vec& u_des, FaultInjection fault = {});

/// Desired task trajectory x_d(t) with feedforward rate and tracking gain.
struct TrackingTask {
  std::function<Vec(double)> x_d;
  std::function<Vec(double)> xdot_d;
  double lambda = 1.0;
  /// When set, the task is the joint vector itself (y(q) = q, J_y = I).
  bool joint_space = false;
};

TrackingTask setpoint_task(Vec target, double lambda, bool joint_space = false);
TrackingTask line_task(Vec start, Vec velocity, double lambda);
/// Planar circle: center + radius (cos(omega t + phase), sin(omega t + phase)).
TrackingTask circle_task(Vec center, double radius, double omega, double phase, double lambda);

/// qd_des = J_y^+ (xd_d - lambda (y(q) - x_d)), J_y^+ the right pseudoinverse.
/// Throws SingularityError if det(J_y J_y^T) < kPseudoinverseDet.
Vec tracking_qdot_des(const RobotModel& model, const Vec& q, double t, const TrackingTask& task);

/// Kinematic velocity filter: J_h qd >= -alpha(h) with qd as the input.
FilterOutput velocity_filter(const KinematicBarrier& kin, const Vec& q, const ClassKappa& a,
                             const Vec& qdot_des, FaultInjection fault = {});

/// Energy-based torque filter:
///   -qd^T B u + G^T qd + alpha_e J_h qd >= -alpha(h_D).
FilterOutput torque_filter(const EnergyBarrier& b, const State& s, const ClassKappa& a,
                           const Vec& u_des, FaultInjection fault = {});

enum class GravityMode { keep_gravity, drop_gravity };

/// Reduced-model torque filter. keep_gravity:
///   -qd^T B u + G^T qd + alpha_e J_h qd >= -alpha(-c_u |qd|^2 + alpha_e h);
/// drop_gravity replaces G^T qd by -c_u |qd| (requires |G| <= c_u).
FilterOutput robust_torque_filter(const EnergyBarrier& b, const State& s, const ClassKappa& a,
                                  const Vec& u_des, double c_u, GravityMode mode,
                                  FaultInjection fault = {});

/// Velocity-command filter for an embedded D loop u = -K_vel (qd - qd_cmd).
/// With gravity_precompensation the torque also carries B^-1 G and the
/// gravity term drops out of the constraint.
FilterOutput velocity_command_filter(const EnergyBarrier& b, const State& s, const ClassKappa& a,
                                     const Mat& k_vel, const Vec& qdot_des,
                                     bool gravity_precompensation = false,
                                     FaultInjection fault = {});

/// u = -K_vel (qd - qd_cmd).
Vec low_level_pd(const Vec& qdot, const Vec& qdot_cmd, const Mat& k_vel);

/// Underactuated filter on hhat_D using the Schur-reduced barrier dynamics.
FilterOutput underactuated_filter(const UnderactuatedBarrier& b, const State& s,
                                  const ClassKappa& a, const Vec& u_des,
                                  FaultInjection fault = {});

/// Bounds for the reduced-model underactuated filter, valid on a state box:
///   c_l <= D_h <= c_u, |C_h| <= c_u |qd|, |G_h| <= c_u, |D_h_rate| <= c_u |qd|.
struct UnderactuatedBounds {
  double c_l = 0.0;
  double c_u = 0.0;
};

FilterOutput robust_underactuated_filter(const UnderactuatedBarrier& b, const State& s,
                                         const ClassKappa& a, const Vec& u_des,
                                         UnderactuatedBounds bounds, FaultInjection fault = {});

// Constraint margins (hdot + alpha(barrier)) at an arbitrary input. Used by
// the simulator to log residuals and by the implication checks.
double torque_constraint_margin(const EnergyBarrier& b, const State& s, const ClassKappa& a,
                                const Vec& u);
double robust_torque_constraint_margin(const EnergyBarrier& b, const State& s,
                                       const ClassKappa& a, const Vec& u, double c_u,
                                       GravityMode mode);
double underactuated_constraint_margin(const UnderactuatedBarrier& b, const State& s,
                                       const ClassKappa& a, const Vec& u);
double robust_underactuated_constraint_margin(const UnderactuatedBarrier& b, const State& s,
                                              const ClassKappa& a, const Vec& u,
                                              UnderactuatedBounds bounds);

}  // namespace cbf
