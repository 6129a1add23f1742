#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "cbf/errors.hpp"
#include "cbf/qp_oracle.hpp"
#include "cbf/schur.hpp"
#include "oracles.hpp"

using namespace cbf;
using std::numbers::pi;

namespace {

std::mt19937_64 rng(5);

double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double gauss(double s) { return std::normal_distribution<double>(0.0, s)(rng); }

Vec gauss_vec(int n, double s) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(s);
  return v;
}

Vec uniform_in(const Vec& lo, const Vec& hi) {
  Vec v(lo.size());
  for (int i = 0; i < lo.size(); ++i) v[i] = uni(lo[i], hi[i]);
  return v;
}

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

}  // namespace

TEST_CASE("single-constraint QP examples") {
  CHECK(solve_single_constraint_qp({vec1(0.0), vec1(1.0), 1.0})[0] == 1.0);
  CHECK(solve_single_constraint_qp({vec1(3.0), vec1(1.0), 1.0})[0] == 3.0);
  CHECK(solve_single_constraint_qp({vec1(0.0), vec1(-2.0), 1.0})[0] == -0.5);
  CHECK_THROWS_AS(solve_single_constraint_qp({vec1(0.0), vec1(0.0), 1.0}), InfeasibleError);
  CHECK(solve_single_constraint_qp({vec1(4.0), vec1(0.0), -1.0})[0] == 4.0);
  CHECK_THROWS_AS(solve_single_constraint_qp({vec1(0.0), Vec::Zero(2), 1.0}), DomainError);
}

TEST_CASE("KKT solution agrees with the projection oracle and beats feasible perturbations") {
  double worst = 0.0;
  int losses = 0;
  for (int i = 0; i < 5000; ++i) {
    const int m = 1 + static_cast<int>(rng() % 4);
    const HalfspaceQP p{gauss_vec(m, 3.0), gauss_vec(m, 1.0), gauss(3.0)};
    const Vec u = solve_single_constraint_qp(p);
    worst = std::max(worst, oracle::rel_err(u, oracle::project(p.u_des, p.a, p.b)));
    CHECK(p.a.dot(u) - p.b >= -1e-12 * std::max(1.0, std::abs(p.b)));
    const double best = (u - p.u_des).squaredNorm();
    for (int j = 0; j < 20; ++j) {
      Vec v = u + gauss_vec(m, 0.3);
      if (p.a.dot(v) < p.b) continue;
      if ((v - p.u_des).squaredNorm() < best - 1e-12 * std::max(1.0, best)) ++losses;
    }
  }
  CHECK(worst <= 1e-12);
  CHECK(losses == 0);
}

TEST_CASE("grid search brackets the closed form") {
  for (int i = 0; i < 30; ++i) {
    const int m = 1 + i % 3;
    const double res = m == 3 ? 0.1 : 0.02;
    const HalfspaceQP p{gauss_vec(m, 1.0), gauss_vec(m, 1.0), gauss(1.0)};
    if (p.a.norm() < 0.3) continue;
    const Vec u = solve_single_constraint_qp(p);
    if ((u - p.u_des).lpNorm<Eigen::Infinity>() > 2.5) continue;
    const GridSolution g = grid_search_qp(p, 3.0, res);
    const double kkt = (u - p.u_des).squaredNorm();
    CHECK(g.objective >= kkt - 1e-12);
    CHECK(p.a.dot(g.u) >= p.b - 1e-12);
    // Nearest feasible grid point is within a cell plus a step along a.
    CHECK((g.u - u).norm() <= 2.0 * res * std::sqrt(static_cast<double>(m)) * (1.0 + p.a.norm() / p.a.lpNorm<1>()));
  }
  const HalfspaceQP far{vec1(0.0), vec1(1.0), 10.0};
  CHECK_THROWS_AS(grid_search_qp(far, 1.0, 0.1), InfeasibleError);
  CHECK_THROWS_AS(grid_search_qp({Vec::Zero(4), Vec::Ones(4), 0.0}, 1.0, 0.1), DomainError);
}

TEST_CASE("half lambda max on the double integrator is m / 2") {
  for (double m : {1.0, 3.0}) {
    const ModelPtr di = make_double_integrator({m});
    const BoundEstimate e =
        bound_estimator(*di, di->default_box(), BoundQuantity::half_lambda_max_D, {1.0, 100, 1});
    CHECK(e.upper == doctest::Approx(m / 2).epsilon(1e-15));
    CHECK(e.warning.empty());
  }
}

TEST_CASE("sampled bounds dominate fresh random samples") {
  const ModelPtr arm = make_two_link_arm();
  const StateBox box = arm->default_box();
  const BoundEstimate lam = bound_estimator(*arm, box, BoundQuantity::half_lambda_max_D, {1.1, 10000, 1});
  const BoundEstimate grav = bound_estimator(*arm, box, BoundQuantity::norm_G, {1.1, 10000, 1});
  for (int i = 0; i < 10000; ++i) {
    const Vec q = uniform_in(box.q_lo, box.q_hi);
    const Mat d = arm->mass_matrix(q);
    CHECK(0.5 * Eigen::SelfAdjointEigenSolver<Mat>(d).eigenvalues().maxCoeff() <= lam.upper);
    CHECK(arm->gravity_vector(q).norm() <= grav.upper);
  }
  // Factor 1 reproduces the raw sample maximum.
  const BoundEstimate raw = bound_estimator(*arm, box, BoundQuantity::norm_G, {1.0, 10000, 1});
  CHECK(grav.upper == doctest::Approx(1.1 * raw.upper).epsilon(1e-15));
  // More samples never shrink the estimate on the same sequence.
  const BoundEstimate more = bound_estimator(*arm, box, BoundQuantity::norm_G, {1.0, 20000, 1});
  CHECK(more.upper >= raw.upper);
}

TEST_CASE("reduced-inertia bounds for the cart-pole") {
  const ModelPtr cp = make_cart_pole();
  const StateBox box = cp->default_box();
  const UnderactuatedBarrier ub = make_underactuated_barrier(
      barrier_catalog(AngleLimit{5 * pi / 6, true, 1}, cp), select_coordinates(2, {0}), 1.0);
  const BoundEstimate e = bound_estimator(*cp, box, BoundQuantity::D_h_bounds, {1.25, 10000, 1}, &ub);
  CHECK(e.lower > 0.0);
  CHECK(e.lower <= e.upper);
  CHECK(e.coverage > 0.0);
  CHECK(e.coverage <= 1.0);
  CHECK(e.warning.empty() == (e.coverage == 1.0));
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec q = uniform_in(box.q_lo, box.q_hi);
    const Vec qd = uniform_in(box.qdot_lo, box.qdot_hi);
    SchurReduction red;
    try {
      red = schur_reduce(*cp, ub.kin, ub.complement, q, qd);
    } catch (const Error&) {
      continue;
    }
    ++checked;
    const double v = qd.norm();
    CHECK(red.D_h >= e.lower);
    CHECK(red.D_h <= e.upper);
    CHECK(std::abs(red.G_h) <= e.upper);
    CHECK(red.C_h.norm() <= e.upper * v + 1e-12);
    CHECK(std::abs(red.D_h_rate) <= e.upper * v + 1e-12);
  }
  CHECK(checked > 9000);
  CHECK_THROWS_AS(bound_estimator(*cp, box, BoundQuantity::D_h_bounds), BoundError);
}

TEST_CASE("bound estimator argument checks") {
  const ModelPtr arm = make_two_link_arm();
  StateBox box = arm->default_box();
  CHECK_THROWS_AS(bound_estimator(*arm, box, BoundQuantity::norm_G, {0.9, 100, 1}), ParameterError);
  CHECK_THROWS_AS(bound_estimator(*arm, box, BoundQuantity::norm_G, {1.0, 0, 1}), ParameterError);
  box.q_hi[0] = box.q_lo[0];
  CHECK_THROWS_AS(bound_estimator(*arm, box, BoundQuantity::norm_G), ParameterError);
  CHECK_THROWS_AS(bound_estimator(*make_double_integrator({1.0}), arm->default_box(), BoundQuantity::norm_G),
                  ParameterError);
  for (BoundQuantity q : {BoundQuantity::half_lambda_max_D, BoundQuantity::norm_G, BoundQuantity::D_h_bounds})
    CHECK(bound_quantity_from_string(to_string(q)) == q);
  CHECK_THROWS_AS(bound_quantity_from_string("lambda"), ParameterError);
}

TEST_CASE("Halton points") {
  auto p = halton_point(1, 2);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  p = halton_point(2, 2);
  CHECK(p[0] == 0.25);
  CHECK(p[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  p = halton_point(3, 3);
  CHECK(p[0] == 0.75);
  CHECK(p[2] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(halton_point(0, 4) == std::vector<double>(4, 0.0));
  for (std::uint64_t i = 0; i < 1000; ++i) {
    for (double x : halton_point(i, 8)) {
      CHECK(x >= 0.0);
      CHECK(x < 1.0);
    }
  }
  CHECK_THROWS_AS(halton_point(1, 9), DomainError);
  CHECK_THROWS_AS(halton_point(1, 0), DomainError);
}

TEST_CASE("bound cache round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "cbf_bound_cache_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "bounds.txt";
  const ModelPtr arm = make_two_link_arm();
  const StateBox box = arm->default_box();
  const BoundOptions opt{1.25, 500, 3};
  const std::string key = BoundCache::make_key(*arm, box, BoundQuantity::norm_G, opt);
  CHECK(key.find(' ') == std::string::npos);
  CHECK(key != BoundCache::make_key(*arm, box, BoundQuantity::norm_G, {1.25, 500, 4}));
  CHECK(key != BoundCache::make_key(*arm, box, BoundQuantity::half_lambda_max_D, opt));
  CHECK(key != BoundCache::make_key(*make_model("two_link_arm", {{"m2", 2.0}}), box,
                                    BoundQuantity::norm_G, opt));

  BoundCache cache(path);
  CHECK_FALSE(cache.lookup(key).has_value());
  const BoundEstimate e = bound_estimator(*arm, box, BoundQuantity::norm_G, opt);
  cache.store(key, e);
  cache.store("other", BoundEstimate{0.5, 2.0, 0.75, 10, ""});
  const BoundCache reread(path);
  const auto got = reread.lookup(key);
  REQUIRE(got.has_value());
  CHECK(got->upper == e.upper);
  CHECK(got->lower == e.lower);
  CHECK(got->samples == e.samples);
  const auto other = reread.lookup("other");
  REQUIRE(other.has_value());
  CHECK(other->coverage == 0.75);
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  std::filesystem::remove_all(dir);
}
