#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cbf/barrier.hpp"
#include "cbf/errors.hpp"
#include "oracles.hpp"

using namespace cbf;
using std::numbers::pi;

namespace {

std::mt19937_64 rng(7);

double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

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

State random_state(const RobotModel& m) {
  const StateBox b = m.default_box();
  State s{Vec(m.dof()), Vec(m.dof())};
  for (int i = 0; i < m.dof(); ++i) {
    s.q[i] = uni(b.q_lo[i], b.q_hi[i]);
    s.qdot[i] = uni(b.qdot_lo[i], b.qdot_hi[i]);
  }
  return s;
}

KinematicBarrier arm_obstacle(ModelPtr arm) {
  return barrier_catalog(SphereObstacle{vec2(1.2, 0.8), 0.3}, arm);
}

KinematicBarrier di_box(ModelPtr di) { return barrier_catalog(PositionBox{2.0, 0}, di); }

KinematicBarrier pole_box(ModelPtr cp) { return barrier_catalog(AngleBox{pi / 6, pi, 1}, cp); }

}  // namespace

TEST_CASE("catalog values at reference points") {
  const ModelPtr arm = make_two_link_arm();
  // Tip at (2, 0) for q = 0; obstacle radius d centered 2d away.
  const double d = 0.3;
  const KinematicBarrier sph = barrier_catalog(SphereObstacle{vec2(2.0 - 2 * d, 0.0), d}, arm);
  CHECK(sph.value(vec2(0.0, 0.0)) == doctest::Approx(3 * d * d).epsilon(1e-14));

  const KinematicBarrier ab = pole_box(make_cart_pole());
  CHECK(ab.value(vec2(0.4, pi)) == doctest::Approx((pi / 6) * (pi / 6)).epsilon(1e-15));

  const KinematicBarrier pb = di_box(make_double_integrator());
  CHECK(pb.value(vec1(0.0)) == 4.0);
  CHECK(pb.value(vec1(2.0)) == 0.0);

  const KinematicBarrier lim = barrier_catalog(AngleLimit{1.0, false, 1}, make_cart_pole());
  CHECK(lim.value(vec2(0.0, 0.25)) == 0.75);
}

TEST_CASE("catalog rejects bad parameters") {
  const ModelPtr arm = make_two_link_arm();
  CHECK_THROWS_AS(barrier_catalog(SphereObstacle{vec2(1.0, 1.0), 0.0}, arm), ParameterError);
  CHECK_THROWS_AS(barrier_catalog(SphereObstacle{vec2(1.0, 1.0), -0.2}, arm), ParameterError);
  CHECK_THROWS_AS(barrier_catalog(SphereObstacle{vec1(1.0), 0.2}, arm), ParameterError);
  CHECK_THROWS_AS(barrier_catalog(AngleBox{0.0, pi, 1}, make_cart_pole()), ParameterError);
  CHECK_THROWS_AS(barrier_catalog(PositionBox{-1.0, 0}, make_double_integrator()), ParameterError);
  CHECK_THROWS_AS(barrier_catalog(PositionBox{1.0, 3}, make_double_integrator()), ParameterError);
}

TEST_CASE("extended class-K functions") {
  CHECK(make_class_kappa(ClassKappa::Kind::linear, 1.0)(0.0) == 0.0);
  CHECK(make_class_kappa(ClassKappa::Kind::linear, 2.0)(-0.5) == -1.0);
  CHECK(make_class_kappa(ClassKappa::Kind::cubic, 1.0)(2.0) == 8.0);
  CHECK_THROWS_AS(make_class_kappa(ClassKappa::Kind::linear, 0.0), ParameterError);
  for (auto kind : {ClassKappa::Kind::linear, ClassKappa::Kind::cubic}) {
    const ClassKappa a = make_class_kappa(kind, 1.7);
    double prev = a(-5.0);
    for (double s = -5.0 + 0.01; s <= 5.0; s += 0.01) {
      CHECK(a(s) > prev);
      prev = a(s);
      if (s != 0.0) CHECK((a(s) > 0.0) == (s > 0.0));
    }
  }
}

TEST_CASE("barrier gradients agree with central differences") {
  const ModelPtr arm = make_two_link_arm();
  const ModelPtr cp = make_cart_pole();
  const ModelPtr di = make_double_integrator();
  const std::vector<KinematicBarrier> bars = {
      arm_obstacle(arm), pole_box(cp), di_box(di),
      barrier_catalog(AngleLimit{5 * pi / 6, true, 1}, cp)};
  for (const KinematicBarrier& b : bars) {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const Vec q = random_state(b.model()).q;
      const oracle::Vec fd =
          oracle::fd_gradient([&](const oracle::Vec& x) { return b.value(Vec(x)); }, oracle::Vec(q));
      worst = std::max(worst, (fd.transpose() - oracle::Row(b.gradient(q))).norm());
    }
    INFO(describe(b.descriptor()));
    CHECK(worst <= 1e-6);
  }
  // Sphere barrier against the hand-written kinematics.
  const oracle::ArmSphere ref{oracle::Arm{}, (oracle::Vec(2) << 1.2, 0.8).finished(), 0.3};
  const KinematicBarrier sph = arm_obstacle(arm);
  for (int i = 0; i < 200; ++i) {
    const Vec q = random_state(*arm).q;
    CHECK(std::abs(sph.value(q) - ref.h(q)) < 1e-12);
    CHECK((oracle::Row(sph.gradient(q)) - ref.J(q)).norm() < 1e-12);
  }
}

TEST_CASE("barrier Hessians agree with differences of the gradient") {
  const ModelPtr arm = make_two_link_arm();
  const KinematicBarrier b = arm_obstacle(arm);
  for (int i = 0; i < 200; ++i) {
    const Vec q = random_state(*arm).q;
    const Mat H = b.hessian(q);
    for (int j = 0; j < 2; ++j) {
      Vec a = q, c = q;
      a[j] += 1e-6;
      c[j] -= 1e-6;
      const Vec col = (b.gradient(a) - b.gradient(c)).transpose() / 2e-6;
      CHECK((col - H.col(j)).norm() < 1e-6);
    }
  }
}

TEST_CASE("catalog gradients do not vanish on the boundary") {
  const ModelPtr cp = make_cart_pole();
  const KinematicBarrier ab = pole_box(cp);
  for (double th : {5 * pi / 6, 7 * pi / 6}) CHECK(ab.gradient(vec2(0.0, th)).norm() > 0.5);
  const ModelPtr arm = make_two_link_arm();
  const KinematicBarrier sph = arm_obstacle(arm);
  // Boundary configurations: tip on the circle, reached by solving q along a ray.
  int on_boundary = 0;
  for (int i = 0; i < 5000 && on_boundary < 50; ++i) {
    const Vec q = random_state(*arm).q;
    if (std::abs(sph.value(q)) < 1e-2) {
      ++on_boundary;
      CHECK(sph.gradient(q).norm() > 1e-3);
    }
  }
  CHECK(on_boundary > 0);
}

TEST_CASE("energy barrier values and rate") {
  const ModelPtr di = make_double_integrator({1.0});
  const EnergyBarrier e = make_energy_barrier(di_box(di), 1.0);
  CHECK(energy_h_D(e, {vec1(0.0), vec1(1.0)}) == 3.5);
  CHECK(energy_h_D(e, {vec1(1.5), vec1(0.0)}) == 1.0 * (4.0 - 2.25));
  CHECK(hdot_D(e, {vec1(0.0), vec1(1.0)}, vec1(0.0)) == 0.0);
  CHECK(hdot_D(e, {vec1(0.8), vec1(0.0)}, vec1(3.0)) == 0.0);
  CHECK_THROWS_AS(make_energy_barrier(di_box(di), 0.0), ParameterError);
}

TEST_CASE("h_D rate matches a central difference along the flow") {
  const ModelPtr arm = make_two_link_arm();
  const EnergyBarrier e = make_energy_barrier(arm_obstacle(arm), 2.0);
  std::normal_distribution<double> nd(0.0, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const State s = random_state(*arm);
    const Vec u = vec2(nd(rng), nd(rng));
    const Vec qdd = arm->forward_dynamics(s, u);
    const double dl = 1e-5;
    const State plus{s.q + dl * s.qdot, s.qdot + dl * qdd};
    const State minus{s.q - dl * s.qdot, s.qdot - dl * qdd};
    const double fd = (energy_h_D(e, plus) - energy_h_D(e, minus)) / (2 * dl);
    worst = std::max(worst, std::abs(fd - hdot_D(e, s, u)));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("membership examples and S_D inside S") {
  const ModelPtr arm = make_two_link_arm();
  const EnergyBarrier e = make_energy_barrier(arm_obstacle(arm), 1.0);
  const Vec q_safe = vec2(0.0, 0.0);  // tip at (2, 0), far from the obstacle
  REQUIRE(e.kin.value(q_safe) > 0.0);
  Membership m = membership(e, {q_safe, Vec::Zero(2)});
  CHECK(m.in_S);
  CHECK(m.in_S_D);

  // Find an unsafe configuration: tip inside the obstacle.
  Vec q_bad;
  for (int i = 0; i < 100000; ++i) {
    const Vec q = random_state(*arm).q;
    if (e.kin.value(q) < -0.01) {
      q_bad = q;
      break;
    }
  }
  REQUIRE(q_bad.size() == 2);
  m = membership(e, {q_bad, Vec::Zero(2)});
  CHECK_FALSE(m.in_S);
  CHECK_FALSE(m.in_S_D);

  // Small positive h, large kinetic energy.
  m = membership(e, {q_safe, vec2(10.0, -10.0)});
  CHECK(m.in_S);
  CHECK_FALSE(m.in_S_D);

  std::size_t counter = 0, in_sd = 0;
  for (const ModelPtr& model : {arm, make_cart_pole(), make_double_integrator()}) {
    const KinematicBarrier kin = model->dof() == 1   ? di_box(model)
                                 : model->inputs() == 1 ? pole_box(model)
                                                        : arm_obstacle(model);
    const EnergyBarrier eb = make_energy_barrier(kin, 1.0);
    for (int i = 0; i < 10000; ++i) {
      const Membership mm = membership(eb, random_state(*model));
      if (mm.in_S_D) ++in_sd;
      if (mm.in_S_D && !mm.in_S) ++counter;
    }
  }
  CHECK(counter == 0);
  CHECK(in_sd > 100);
}

TEST_CASE("h_D is bounded by alpha_e h and monotone in alpha_e") {
  const ModelPtr arm = make_two_link_arm();
  const KinematicBarrier kin = arm_obstacle(arm);
  const EnergyBarrier lo = make_energy_barrier(kin, 0.5);
  const EnergyBarrier hi = make_energy_barrier(kin, 5.0);
  for (int i = 0; i < 5000; ++i) {
    const State s = random_state(*arm);
    CHECK(energy_h_D(lo, s) <= lo.alpha_e * kin.value(s.q));
    if (energy_h_D(lo, s) >= 0.0) CHECK(energy_h_D(hi, s) >= 0.0);
    CHECK(energy_h_D(lo, {s.q, Vec::Zero(2)}) == lo.alpha_e * kin.value(s.q));
  }
}

TEST_CASE("underactuated barrier value") {
  const ModelPtr cp = make_cart_pole();
  const UnderactuatedBarrier ub =
      make_underactuated_barrier(pole_box(cp), select_coordinates(2, {0}), 1.3);
  // Upright: hdot = J_h qd = 0 regardless of the cart velocity.
  CHECK(underactuated_h_hat(ub, {vec2(0.2, pi), vec2(3.0, 0.7)}) ==
        doctest::Approx(1.3 * (pi / 6) * (pi / 6)).epsilon(1e-14));
  // hdot = 0 away from upright: only theta_dot = 0.
  CHECK(underactuated_h_hat(ub, {vec2(0.0, 3.0), vec2(-1.0, 0.0)}) ==
        doctest::Approx(1.3 * ub.kin.value(vec2(0.0, 3.0))).epsilon(1e-14));

  const oracle::CartPole ref;
  oracle::Mat H = oracle::Mat::Zero(2, 2);
  H(1, 1) = -2.0;
  for (int i = 0; i < 2000; ++i) {
    const State s{vec2(uni(-1, 1), uni(5 * pi / 6, 7 * pi / 6)), vec2(uni(-3, 3), uni(-3, 3))};
    if (std::abs(s.q[1] - pi) < 1e-3) continue;
    const oracle::Reduced r =
        oracle::reduce(ref.terms(s.q, s.qdot), s.qdot, oracle::Row(ub.kin.gradient(s.q)), H);
    const double v = underactuated_h_hat(ub, s);
    CHECK(v <= ub.alpha_e * ub.kin.value(s.q));
    CHECK(std::abs(v - oracle::h_hat(r, ub.kin.value(s.q), ub.alpha_e)) < 1e-10);
  }
}
