#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cbf/barrier.hpp"
#include "cbf/errors.hpp"
#include "cbf/filter.hpp"
#include "cbf/sim.hpp"
#include "oracles.hpp"

using namespace cbf;
using std::numbers::pi;

namespace {

std::mt19937_64 rng(23);

double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double gauss(double s) { return std::normal_distribution<double>(0.0, s)(rng); }

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}
Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
Vec gauss_vec(int n, double s) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(s);
  return v;
}

struct Kappa {
  bool cubic;
  double gain;
  ClassKappa make() const {
    return make_class_kappa(cubic ? ClassKappa::Kind::cubic : ClassKappa::Kind::linear, gain);
  }
};
Kappa random_kappa() { return {uni(0, 1) < 0.5, uni(0.1, 10.0)}; }

State arm_state() { return {vec2(uni(-pi, pi), uni(-pi, pi)), vec2(uni(-5, 5), uni(-5, 5))}; }

const Vec kObstacle = vec2(1.2, 0.8);

}  // namespace

TEST_CASE("explicit CBF-QP examples") {
  const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, 1.0);
  RowVec lg(1);
  lg << 1.0;
  FilterOutput out = explicit_cbf_qp(0.0, lg, 1.0, a, vec1(0.0));
  CHECK(out.psi == 1.0);
  CHECK(out.command[0] == 0.0);
  CHECK_FALSE(out.intervened);

  out = explicit_cbf_qp(0.0, lg, 0.0, a, vec1(-1.0));
  CHECK(out.psi == -1.0);
  CHECK(out.intervened);
  CHECK(out.command[0] == 0.0);
  const oracle::Vec ref = oracle::project(oracle::Vec::Constant(1, -1.0), oracle::Vec::Ones(1), 0.0);
  CHECK(ref[0] == 0.0);

  const RowVec zero = RowVec::Zero(2);
  CHECK_THROWS_AS(explicit_cbf_qp(-1.0, zero, 0.5, a, vec2(1, 1)), InfeasibleError);
  out = explicit_cbf_qp(-0.2, zero, 0.5, a, vec2(1, 1));
  CHECK(out.command == vec2(1, 1));
}

TEST_CASE("explicit CBF-QP: oracle equivalence, stationarity and activity") {
  double worst = 0.0, colinear = 0.0, active = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int m = 1 + static_cast<int>(rng() % 4);
    RowVec lg(m);
    for (int j = 0; j < m; ++j) lg[j] = gauss(2.0);
    const double lf = gauss(5.0), h = uni(-1.0, 3.0);
    const Kappa k = random_kappa();
    const Vec u_des = gauss_vec(m, 5.0);
    const FilterOutput out = explicit_cbf_qp(lf, lg, h, k.make(), u_des);
    const oracle::Vec ref = oracle::project(u_des, lg.transpose(), -lf - oracle::kappa(k.cubic, k.gain, h));
    worst = std::max(worst, oracle::rel_err(out.command, ref));
    CHECK(out.intervened == (out.psi < 0.0));
    CHECK(out.constraint_residual >= -1e-9);
    if (out.intervened) {
      const Vec d = out.command - u_des;
      // d parallel to Lg^T.
      colinear = std::max(colinear, (d - lg.transpose() * (lg.dot(d) / lg.squaredNorm())).norm() /
                                        std::max(1.0, d.norm()));
      active = std::max(active, std::abs(out.constraint_residual) / std::max(1.0, std::abs(lf)));
    } else {
      CHECK(out.command == u_des);
    }
  }
  CHECK(worst <= 1e-10);
  CHECK(colinear <= 1e-9);
  CHECK(active <= 1e-9);
}

TEST_CASE("velocity filter") {
  const ModelPtr arm = make_two_link_arm();
  const KinematicBarrier kin = barrier_catalog(SphereObstacle{kObstacle, 0.3}, arm);
  const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, 2.0);

  // Moving away from the obstacle leaves the command untouched.
  const Vec q = vec2(0.0, 0.0);
  const RowVec jh = kin.gradient(q);
  const Vec away = jh.transpose();
  FilterOutput out = velocity_filter(kin, q, a, away);
  CHECK_FALSE(out.intervened);
  CHECK(out.command == away);

  // On the boundary: the filtered velocity is tangent.
  Vec qb;
  for (int i = 0; i < 200000; ++i) {
    const Vec qq = arm_state().q;
    if (std::abs(kin.value(qq)) < 1e-3 && kin.gradient(qq).norm() > 0.1) {
      qb = qq;
      break;
    }
  }
  REQUIRE(qb.size() == 2);
  // Shift along the gradient to land on h = 0 up to rounding.
  for (int it = 0; it < 50; ++it) {
    const RowVec g = kin.gradient(qb);
    qb -= g.transpose() * (kin.value(qb) / g.squaredNorm());
  }
  REQUIRE(std::abs(kin.value(qb)) < 1e-14);
  const Vec inward = -kin.gradient(qb).transpose();
  out = velocity_filter(kin, qb, a, inward);
  CHECK(out.intervened);
  CHECK(std::abs(kin.gradient(qb).dot(out.command)) < 1e-12);

  const oracle::ArmSphere ref{oracle::Arm{}, oracle::Vec(kObstacle), 0.3};
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec qq = arm_state().q;
    const Vec qd_des = gauss_vec(2, 3.0);
    const Kappa k = random_kappa();
    const FilterOutput o = velocity_filter(kin, qq, k.make(), qd_des);
    const oracle::Vec r =
        oracle::project(qd_des, ref.J(qq).transpose(), -oracle::kappa(k.cubic, k.gain, ref.h(qq)));
    worst = std::max(worst, oracle::rel_err(o.command, r));
    CHECK(o.constraint_residual >= -1e-9);
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("torque filter: worked example on the double integrator") {
  const ModelPtr di = make_double_integrator({1.0});
  const EnergyBarrier e = make_energy_barrier(barrier_catalog(PositionBox{2.0, 0}, di), 1.0);
  const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, 1.0);
  const State s{vec1(0.0), vec1(2.0)};
  const FilterOutput out = torque_filter(e, s, a, vec1(10.0));
  CHECK(out.psi == doctest::Approx(-18.0).epsilon(1e-15));
  CHECK(out.intervened);
  CHECK(out.command[0] == doctest::Approx(1.0).epsilon(1e-15));
  // Same answer from the KKT oracle on (Lf, Lg, h_D).
  const oracle::Vec r = oracle::project(oracle::Vec::Constant(1, 10.0), oracle::Vec::Constant(1, -2.0),
                                        -(0.0 + 2.0));
  CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-15));

  // At rest the filter never intervenes.
  const FilterOutput rest = torque_filter(e, {vec1(0.5), vec1(0.0)}, a, vec1(-100.0));
  CHECK_FALSE(rest.intervened);
  CHECK(rest.command[0] == -100.0);
}

TEST_CASE("torque filter: oracle equivalence and post-hoc constraint") {
  const ModelPtr arm = make_two_link_arm();
  const EnergyBarrier e = make_energy_barrier(barrier_catalog(SphereObstacle{kObstacle, 0.3}, arm), 1.0);
  const oracle::Arm ra;
  const oracle::ArmSphere ref{ra, oracle::Vec(kObstacle), 0.3};
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const State s = arm_state();
    const Vec u_des = gauss_vec(2, 20.0);
    const Kappa k = random_kappa();
    EnergyBarrier eb = e;
    eb.alpha_e = uni(0.1, 20.0);
    const FilterOutput out = torque_filter(eb, s, k.make(), u_des);
    const oracle::Halfspace hs = oracle::torque_halfspace(ra.terms(s.q, s.qdot), s.qdot, ref.J(s.q),
                                                          ref.h(s.q), eb.alpha_e, k.cubic, k.gain);
    worst = std::max(worst, oracle::rel_err(out.command, oracle::project(u_des, hs.a, hs.b)));
    CHECK(out.constraint_residual >= -1e-9 * std::max(1.0, std::abs(out.psi)));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("robust torque filter") {
  const ModelPtr arm = make_two_link_arm();
  const EnergyBarrier e = make_energy_barrier(barrier_catalog(SphereObstacle{kObstacle, 0.3}, arm), 1.0);
  const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, 1.0);
  // c_u >= lambda_max(D)/2 and |G| <= c_u over the joint box.
  const double c_u = 40.0;
  for (GravityMode mode : {GravityMode::keep_gravity, GravityMode::drop_gravity}) {
    const FilterOutput rest = robust_torque_filter(e, {vec2(0.0, 0.0), Vec::Zero(2)}, a, vec2(5, -5), c_u, mode);
    CHECK_FALSE(rest.intervened);
    CHECK(rest.command == vec2(5, -5));
  }
  CHECK_THROWS_AS(robust_torque_filter(e, arm_state(), a, vec2(0, 0), 0.0, GravityMode::keep_gravity),
                  BoundError);

  std::size_t counterexamples = 0, robust_ok = 0;
  for (int i = 0; i < 10000; ++i) {
    const State s = arm_state();
    const Vec u = gauss_vec(2, 50.0);
    const GravityMode mode = i % 2 ? GravityMode::keep_gravity : GravityMode::drop_gravity;
    const double rob = robust_torque_constraint_margin(e, s, a, u, c_u, mode);
    const double exact = torque_constraint_margin(e, s, a, u);
    if (rob >= 0.0) {
      ++robust_ok;
      if (exact < 0.0) ++counterexamples;
    }
    // Filtered input meets both constraints.
    const FilterOutput out = robust_torque_filter(e, s, a, u, c_u, mode);
    CHECK(out.constraint_residual >= -1e-9 * std::max(1.0, std::abs(out.psi)));
    CHECK(torque_constraint_margin(e, s, a, out.command) >= -1e-9 * std::max(1.0, std::abs(out.psi)));
  }
  CHECK(counterexamples == 0);
  CHECK(robust_ok > 100);

  // Widening c_u never delays intervention.
  for (int i = 0; i < 2000; ++i) {
    const State s = arm_state();
    const Vec u = gauss_vec(2, 20.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double c : {30.0, 35.0, 40.0, 60.0, 100.0}) {
      const double psi = robust_torque_filter(e, s, a, u, c, GravityMode::keep_gravity).psi;
      CHECK(psi <= prev);
      prev = psi;
    }
  }
}

TEST_CASE("low-level PD") {
  const Mat I = Mat::Identity(2, 2);
  CHECK(low_level_pd(vec2(1, 2), vec2(1, 2), I).norm() == 0.0);
  CHECK(low_level_pd(vec2(1, 0), vec2(0, 0), I) == vec2(-1, 0));
  const Vec a = low_level_pd(vec2(0.3, -0.4), vec2(1, 1), 3.0 * I);
  CHECK((low_level_pd(vec2(0.3, -0.4), vec2(1, 1), 6.0 * I) - 2.0 * a).norm() < 1e-15);
  CHECK_THROWS_AS(low_level_pd(vec2(1, 0), vec1(0), I), DomainError);
}

TEST_CASE("velocity-command filter") {
  const ModelPtr arm = make_two_link_arm();
  const EnergyBarrier e = make_energy_barrier(barrier_catalog(SphereObstacle{kObstacle, 0.3}, arm), 1.0);
  const Mat K = 10.0 * Mat::Identity(2, 2);
  const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, 1.0);
  const FilterOutput rest = velocity_command_filter(e, {vec2(0, 0), Vec::Zero(2)}, a, K, vec2(3, 3));
  CHECK_FALSE(rest.intervened);
  CHECK(rest.command == vec2(3, 3));
  Mat bad = K;
  bad(0, 1) = 5.0;
  CHECK_THROWS_AS(velocity_command_filter(e, arm_state(), a, bad, vec2(0, 0)), ParameterError);

  const oracle::Arm ra;
  const oracle::ArmSphere ref{ra, oracle::Vec(kObstacle), 0.3};
  double worst = 0.0, composed = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const State s = arm_state();
    const Vec qd_des = gauss_vec(2, 5.0);
    const Kappa k = random_kappa();
    Mat Kr(2, 2);
    const double g1 = uni(1, 20), g2 = uni(1, 20), off = uni(-0.9, 0.9) * std::sqrt(g1 * g2);
    Kr << g1, off, off, g2;
    const FilterOutput out = velocity_command_filter(e, s, k.make(), Kr, qd_des);
    const oracle::Halfspace hs = oracle::velocity_command_halfspace(
        ra.terms(s.q, s.qdot), s.qdot, Kr, ref.J(s.q), ref.h(s.q), e.alpha_e, k.cubic, k.gain);
    worst = std::max(worst, oracle::rel_err(out.command, oracle::project(qd_des, hs.a, hs.b)));
    // Through the PD loop and into the h_D rate.
    const Vec u = low_level_pd(s.qdot, out.command, Kr);
    const double res = hdot_D(e, s, u) + k.make()(energy_h_D(e, s));
    composed = std::min(composed, res / std::max(1.0, std::abs(out.psi)));
  }
  CHECK(worst <= 1e-10);
  CHECK(composed >= -1e-9);
}

TEST_CASE("velocity-command filter with gravity precompensation") {
  const ModelPtr arm = make_two_link_arm();
  const EnergyBarrier e = make_energy_barrier(barrier_catalog(SphereObstacle{kObstacle, 0.3}, arm), 1.0);
  const Mat K = 10.0 * Mat::Identity(2, 2);
  const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, 3.0);
  for (int i = 0; i < 2000; ++i) {
    const State s = arm_state();
    const FilterOutput out = velocity_command_filter(e, s, a, K, gauss_vec(2, 5.0), true);
    const Vec u = low_level_pd(s.qdot, out.command, K) + arm->gravity_vector(s.q);
    CHECK(hdot_D(e, s, u) + a(energy_h_D(e, s)) >= -1e-9 * std::max(1.0, std::abs(out.psi)));
  }
}

TEST_CASE("tracking velocity") {
  const ModelPtr arm = make_two_link_arm();
  const TrackingTask circle = circle_task(vec2(1.2, 0.3), 0.5, 1.0, 0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    Vec q = arm_state().q;
    if (std::abs(std::sin(q[1])) < 0.1) continue;
    const double t = uni(0, 10);
    const Vec qd = tracking_qdot_des(*arm, q, t, circle);
    const TaskPoint tp = arm->task_map(q);
    const Vec target = circle.xdot_d(t) - circle.lambda * (tp.x - circle.x_d(t));
    CHECK((tp.jacobian * qd - target).norm() <= 1e-9 * std::max(1.0, target.norm()));
    // Square Jacobian: pseudoinverse is the inverse.
    CHECK((qd - tp.jacobian.inverse() * target).norm() <= 1e-9 * std::max(1.0, qd.norm()));
  }
  // Zero error and zero feedforward give zero task velocity.
  const Vec q0 = vec2(0.4, 1.1);
  const TrackingTask hold = setpoint_task(arm->task_map(q0).x, 3.0);
  CHECK((arm->task_map(q0).jacobian * tracking_qdot_des(*arm, q0, 0.0, hold)).norm() < 1e-12);
  // Outstretched arm: the Jacobian is singular.
  CHECK_THROWS_AS(tracking_qdot_des(*arm, vec2(0.3, 0.0), 0.0, hold), SingularityError);
  CHECK_THROWS_AS(setpoint_task(vec2(0, 0), 0.0), ParameterError);
}

TEST_CASE("tracking error decays within the exponential envelope") {
  const ModelPtr arm = make_two_link_arm();
  const double lambda = 2.0;
  const TrackingTask circle = circle_task(vec2(1.2, 0.3), 0.5, 1.0, 0.0, lambda);
  Vec q = vec2(-0.35, 1.4);
  const double e0 = (arm->task_map(q).x - circle.x_d(0.0)).norm();
  REQUIRE(e0 > 0.05);
  const double dt = 1e-3;
  double worst_ratio = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const double t = i * dt;
    const auto f = [&](const Vec& x, double tt) { return tracking_qdot_des(*arm, x, tt, circle); };
    const Vec k1 = f(q, t);
    const Vec k2 = f(q + 0.5 * dt * k1, t + 0.5 * dt);
    const Vec k3 = f(q + 0.5 * dt * k2, t + 0.5 * dt);
    const Vec k4 = f(q + dt * k3, t + dt);
    q += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    const double err = (arm->task_map(q).x - circle.x_d(t + dt)).norm();
    const double env = e0 * std::exp(-lambda * (t + dt));
    if (env > 1e-9) worst_ratio = std::max(worst_ratio, err / env);
  }
  CHECK(worst_ratio <= 1.0 + 1e-3);
}

TEST_CASE("underactuated filter") {
  const ModelPtr cp = make_cart_pole();
  const UnderactuatedBarrier ub = make_underactuated_barrier(
      barrier_catalog(AngleBox{pi / 6, pi, 1}, cp), select_coordinates(2, {0}), 1.0);
  const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, 2.0);

  // hdot = 0: any input passes.
  const FilterOutput still = underactuated_filter(ub, {vec2(0.0, 3.0), vec2(2.0, 0.0)}, a, vec1(50.0));
  CHECK_FALSE(still.intervened);
  CHECK(still.command[0] == 50.0);

  // Near the lower limit and falling further: the filter steps in.
  const State edge{vec2(0.0, 5 * pi / 6 + 0.01), vec2(0.0, -0.4)};
  REQUIRE(underactuated_h_hat(ub, edge) >= 0.0);
  const FilterOutput out = underactuated_filter(ub, edge, a, vec1(0.0));
  CHECK(out.intervened);
  CHECK(out.constraint_residual >= -1e-9);
  CHECK(underactuated_constraint_margin(ub, edge, a, out.command) >= -1e-9);

  const oracle::CartPole ref;
  double worst = 0.0;
  int checked = 0;
  while (checked < 10000) {
    const State s{vec2(uni(-2, 2), uni(5 * pi / 6, 7 * pi / 6)), vec2(uni(-3, 3), uni(-3, 3))};
    if (std::abs(s.q[1] - pi) < 1e-3) continue;
    const Kappa k = random_kappa();
    const Vec u_des = gauss_vec(1, 20.0);
    FilterOutput o;
    try {
      o = underactuated_filter(ub, s, k.make(), u_des);
    } catch (const Error&) {
      continue;
    }
    const oracle::Reduced r = oracle::reduce(ref.terms(s.q, s.qdot), s.qdot,
                                             oracle::Row(ub.kin.gradient(s.q)), ub.kin.hessian(s.q));
    const oracle::Halfspace hs = oracle::underactuated_halfspace(r, ub.kin.value(s.q), ub.alpha_e, k.cubic, k.gain);
    worst = std::max(worst, oracle::rel_err(o.command, oracle::project(u_des, hs.a, hs.b)));
    ++checked;
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("robust underactuated filter") {
  const ModelPtr cp = make_cart_pole();
  const UnderactuatedBarrier ub = make_underactuated_barrier(
      barrier_catalog(AngleLimit{5 * pi / 6, true, 1}, cp), select_coordinates(2, {0}), 1.0);
  const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, 1.0);
  // Bounds comfortably above the true extremes of the reduced terms.
  const UnderactuatedBounds bounds{0.01, 10.0};

  const FilterOutput still = robust_underactuated_filter(ub, {vec2(0.0, 3.0), vec2(2.0, 0.0)}, a, vec1(-7.0), bounds);
  CHECK_FALSE(still.intervened);
  CHECK(still.command[0] == -7.0);
  CHECK_THROWS_AS(robust_underactuated_filter(ub, {vec2(0.0, 3.0), vec2(0.0, 0.1)}, a, vec1(0.0), {0.0, 1.0}),
                  BoundError);
  CHECK_THROWS_AS(robust_underactuated_filter(ub, {vec2(0.0, 3.0), vec2(0.0, 0.1)}, a, vec1(0.0), {2.0, 1.0}),
                  BoundError);

  std::size_t counter = 0, robust_ok = 0;
  for (int i = 0; i < 10000; ++i) {
    const double vs = uni(0.05, 5.0);
    const State s{vec2(uni(-2, 2), uni(2.4, 3.9)), vec2(uni(-vs, vs), uni(-vs, vs))};
    const Vec u = gauss_vec(1, 30.0);
    const double rob = robust_underactuated_constraint_margin(ub, s, a, u, bounds);
    const double exact = underactuated_constraint_margin(ub, s, a, u);
    if (rob >= 0.0) {
      ++robust_ok;
      if (exact < 0.0) ++counter;
    }
  }
  CHECK(counter == 0);
  CHECK(robust_ok > 100);

  for (int i = 0; i < 2000; ++i) {
    const State s{vec2(uni(-2, 2), uni(2.4, 3.9)), vec2(uni(-5, 5), uni(-5, 5))};
    const Vec u = gauss_vec(1, 30.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double c : {10.0, 12.0, 20.0, 50.0}) {
      const double psi = robust_underactuated_filter(ub, s, a, u, {bounds.c_l, c}).psi;
      CHECK(psi <= prev);
      prev = psi;
    }
  }
}

TEST_CASE("fault injection flips the switching sign") {
  const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, 1.0);
  RowVec lg(1);
  lg << 1.0;
  const FilterOutput ok = explicit_cbf_qp(0.0, lg, 0.0, a, vec1(-1.0));
  const FilterOutput bad = explicit_cbf_qp(0.0, lg, 0.0, a, vec1(-1.0), FaultInjection{true});
  CHECK(ok.intervened);
  CHECK_FALSE(bad.intervened);
  CHECK(bad.constraint_residual < 0.0);
}
