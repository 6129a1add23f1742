#include "cbf/verify.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "cbf/barrier.hpp"
#include "cbf/errors.hpp"
#include "cbf/kernels.hpp"
#include "cbf/models.hpp"
#include "cbf/qp_oracle.hpp"
#include "cbf/schur.hpp"

namespace cbf {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec uniform_vec(Rng& rng, const Vec& lo, const Vec& hi) {
  Vec v(lo.size());
  for (int i = 0; i < lo.size(); ++i) v[i] = uniform(rng, lo[i], hi[i]);
  return v;
}

Vec normal_vec(Rng& rng, int n, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

State random_state(Rng& rng, const StateBox& box) {
  return {uniform_vec(rng, box.q_lo, box.q_hi), uniform_vec(rng, box.qdot_lo, box.qdot_hi)};
}

ClassKappa random_alpha(Rng& rng) {
  const auto kind = uniform(rng, 0.0, 1.0) < 0.5 ? ClassKappa::Kind::linear : ClassKappa::Kind::cubic;
  return make_class_kappa(kind, uniform(rng, 0.1, 10.0));
}

// Accumulates residuals against a tolerance.
class Tally {
 public:
  Tally(std::string suite, std::string name, double tol) : tol_(tol) {
    r_.suite = std::move(suite);
    r_.name = std::move(name);
  }
  void add(double residual) {
    ++r_.checked;
    if (!std::isfinite(residual) || residual > tol_) ++r_.failures;
    if (!std::isfinite(residual) || residual > r_.worst)
      r_.worst = std::isfinite(residual) ? residual : std::numeric_limits<double>::infinity();
  }
  void skip() { ++skipped_; }
  PropertyResult done(std::string detail = {}) {
    r_.passed = r_.failures == 0 && r_.checked > 0;
    std::ostringstream os;
    os << "tol " << tol_;
    if (skipped_) os << ", " << skipped_ << " degenerate instances skipped";
    if (!detail.empty()) os << ", " << detail;
    r_.detail = os.str();
    return r_;
  }

 private:
  double tol_;
  std::size_t skipped_ = 0;
  PropertyResult r_;
};

double rel_diff(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

KinematicBarrier arm_obstacle(const ModelPtr& arm) {
  Vec c(2);
  c << 1.2, 0.8;
  return barrier_catalog(SphereObstacle{c, 0.3}, arm);
}

// Time derivative of hhat_D from the full dynamics, using
// D_h = 1 / (J_h D^-1 J_h^T), which needs no complement coordinates.
std::pair<double, RowVec> hhat_rate_terms(const RobotModel& model, const KinematicBarrier& kin,
                                          double alpha_e, const State& s, double* hhat) {
  const Mat d = model.mass_matrix(s.q);
  const auto llt = d.llt();
  const RowVec j = kin.gradient(s.q);
  const Vec dinv_jt = llt.solve(j.transpose());
  const double dh = 1.0 / j.dot(dinv_jt);
  const Mat hess = kin.hessian(s.q);
  const double hdot = j.dot(s.qdot);
  const Vec jdot = hess * s.qdot;
  const Mat ddot = model.mass_matrix_rate(s.q, s.qdot);
  const double gram_rate = 2.0 * jdot.dot(dinv_jt) - dinv_jt.dot(ddot * dinv_jt);
  const double dh_rate = -dh * dh * gram_rate;
  const Vec bias = llt.solve(-model.coriolis_matrix(s.q, s.qdot) * s.qdot - model.gravity_vector(s.q));
  const double hdd0 = j.dot(bias) + s.qdot.dot(jdot);
  const RowVec hdd_u = (llt.solve(model.actuation_matrix(s.q)).transpose() * j.transpose()).transpose();
  *hhat = -0.5 * hdot * hdot * dh + alpha_e * kin.value(s.q);
  const double lf = -hdot * dh * hdd0 - 0.5 * hdot * hdot * dh_rate + alpha_e * hdot;
  return {lf, -hdot * dh * hdd_u};
}

std::vector<PropertyResult> filters_suite(const VerifyOptions& opt) {
  std::vector<PropertyResult> out;
  const std::size_t n = opt.instances;
  const double tol = 1e-10;
  const char* suite = "filters";

  {  // explicit closed form
    Rng rng(opt.seed);
    Tally t(suite, "explicit CBF-QP matches halfspace projection", tol);
    Tally r(suite, "explicit CBF-QP satisfies its constraint", 1e-9);
    for (std::size_t i = 0; i < n; ++i) {
      const int m = 1 + static_cast<int>(rng() % 4);
      const double lf = uniform(rng, -5.0, 5.0);
      const double h = uniform(rng, -1.0, 2.0);
      const RowVec lg = normal_vec(rng, m, 1.0).transpose();
      const Vec u_des = normal_vec(rng, m, 2.0);
      const ClassKappa a = random_alpha(rng);
      if (lg.norm() < 1e-3) {
        t.skip();
        continue;
      }
      const FilterOutput f = explicit_cbf_qp(lf, lg, h, a, u_des, opt.fault);
      const Vec u_o = solve_single_constraint_qp({u_des, lg.transpose(), -lf - a(h)});
      t.add(rel_diff(f.command, u_o));
      r.add(-(lf + lg.dot(f.command) + a(h)) / std::max(1.0, std::abs(lf) + std::abs(a(h))));
    }
    out.push_back(t.done());
    out.push_back(r.done());
  }

  const ModelPtr arm = make_two_link_arm();
  const KinematicBarrier obstacle = arm_obstacle(arm);
  const StateBox arm_box = arm->default_box();

  {  // velocity filter
    Rng rng(opt.seed + 1);
    Tally t(suite, "velocity filter matches halfspace projection", tol);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec q = uniform_vec(rng, arm_box.q_lo, arm_box.q_hi);
      const Vec qd_des = normal_vec(rng, 2, 2.0);
      const ClassKappa a = random_alpha(rng);
      const RowVec j = obstacle.gradient(q);
      if (j.norm() < 1e-3) {
        t.skip();
        continue;
      }
      const FilterOutput f = velocity_filter(obstacle, q, a, qd_des, opt.fault);
      const Vec u_o = solve_single_constraint_qp({qd_des, j.transpose(), -a(obstacle.value(q))});
      t.add(rel_diff(f.command, u_o));
    }
    out.push_back(t.done());
  }

  {  // energy torque filter
    Rng rng(opt.seed + 2);
    Tally t(suite, "torque filter matches halfspace projection", tol);
    for (std::size_t i = 0; i < n; ++i) {
      const State s = random_state(rng, arm_box);
      const EnergyBarrier eb = make_energy_barrier(obstacle, uniform(rng, 0.5, 20.0));
      const ClassKappa a = random_alpha(rng);
      const Vec u_des = normal_vec(rng, 2, 20.0);
      const Vec btq = arm->actuation_matrix(s.q).transpose() * s.qdot;
      if (btq.norm() < 1e-3) {
        t.skip();
        continue;
      }
      const FilterOutput f = torque_filter(eb, s, a, u_des, opt.fault);
      const double hd = -0.5 * s.qdot.dot(arm->mass_matrix(s.q) * s.qdot) + eb.alpha_e * obstacle.value(s.q);
      const double b = -a(hd) - arm->gravity_vector(s.q).dot(s.qdot) -
                       eb.alpha_e * obstacle.gradient(s.q).dot(s.qdot);
      t.add(rel_diff(f.command, solve_single_constraint_qp({u_des, -btq, b})));
    }
    out.push_back(t.done());
  }

  {  // velocity-command filter
    Rng rng(opt.seed + 3);
    Tally t(suite, "velocity-command filter matches halfspace projection", tol);
    for (std::size_t i = 0; i < n; ++i) {
      const State s = random_state(rng, arm_box);
      const EnergyBarrier eb = make_energy_barrier(obstacle, uniform(rng, 0.5, 20.0));
      const ClassKappa a = random_alpha(rng);
      const Mat k = Mat::Identity(2, 2) * uniform(rng, 1.0, 50.0);
      const bool precomp = rng() % 2 == 0;
      const Vec qd_des = normal_vec(rng, 2, 2.0);
      const Mat bm = arm->actuation_matrix(s.q);
      const Vec dir = k.transpose() * bm.transpose() * s.qdot;
      if (dir.norm() < 1e-3) {
        t.skip();
        continue;
      }
      const FilterOutput f = velocity_command_filter(eb, s, a, k, qd_des, precomp, opt.fault);
      const double hd = -0.5 * s.qdot.dot(arm->mass_matrix(s.q) * s.qdot) + eb.alpha_e * obstacle.value(s.q);
      double b = -a(hd) - s.qdot.dot(bm * k * s.qdot) - eb.alpha_e * obstacle.gradient(s.q).dot(s.qdot);
      if (!precomp) b -= arm->gravity_vector(s.q).dot(s.qdot);
      t.add(rel_diff(f.command, solve_single_constraint_qp({qd_des, -dir, b})));
    }
    out.push_back(t.done());
  }

  {  // underactuated filter on the cart-pole
    Rng rng(opt.seed + 4);
    Tally t(suite, "underactuated filter matches halfspace projection", tol);
    const ModelPtr cp = make_cart_pole();
    const KinematicBarrier box = barrier_catalog(AngleBox{std::numbers::pi / 6.0}, cp);
    Vec qlo(2), qhi(2);
    qlo << -5.0, std::numbers::pi / 2.0;
    qhi << 5.0, 1.5 * std::numbers::pi;
    const StateBox sb{qlo, qhi, Vec::Constant(2, -5.0), Vec::Constant(2, 5.0)};
    for (std::size_t i = 0; i < n; ++i) {
      State s = random_state(rng, sb);
      if (std::abs(s.q[1] - std::numbers::pi) < 1e-2) {
        t.skip();
        continue;
      }
      const UnderactuatedBarrier ub =
          make_underactuated_barrier(box, select_coordinates(2, {0}), uniform(rng, 0.5, 20.0));
      const ClassKappa a = random_alpha(rng);
      const Vec u_des = normal_vec(rng, 1, 20.0);
      double hhat = 0.0;
      const auto [lf, lg] = hhat_rate_terms(*cp, box, ub.alpha_e, s, &hhat);
      if (lg.norm() < 1e-3) {
        t.skip();
        continue;
      }
      FilterOutput f;
      try {
        f = underactuated_filter(ub, s, a, u_des, opt.fault);
      } catch (const Error&) {
        t.add(std::numeric_limits<double>::infinity());
        continue;
      }
      t.add(rel_diff(f.command, solve_single_constraint_qp({u_des, lg.transpose(), -lf - a(hhat)})));
    }
    out.push_back(t.done());
  }
  return out;
}

Mat fd_mass_rate(const RobotModel& m, const State& s, double eps) {
  return (m.mass_matrix(s.q + eps * s.qdot) - m.mass_matrix(s.q - eps * s.qdot)) / (2.0 * eps);
}

std::vector<PropertyResult> models_suite(const VerifyOptions& opt) {
  std::vector<PropertyResult> out;
  const char* suite = "models";
  const std::size_t n = 1000;
  const double eps = 1e-6;
  for (const std::string& id : model_ids()) {
    const ModelPtr model = make_model(id);
    const StateBox box = model->default_box();
    Rng rng(opt.seed);
    Tally spd(suite, id + ": mass matrix symmetric positive definite", 1e-12);
    Tally skew(suite, id + ": Ddot - 2C skew-symmetric", 1e-6);
    Tally rate(suite, id + ": analytic Ddot matches finite difference", 1e-6);
    Tally grav(suite, id + ": G is the gradient of the potential", 1e-6);
    Tally jac(suite, id + ": task Jacobian matches finite difference", 1e-6);
    for (std::size_t i = 0; i < n; ++i) {
      const State s = random_state(rng, box);
      const Mat d = model->mass_matrix(s.q);
      const double min_eig = Eigen::SelfAdjointEigenSolver<Mat>(d).eigenvalues().minCoeff();
      spd.add(std::max((d - d.transpose()).cwiseAbs().maxCoeff(), min_eig > 0.0 ? 0.0 : 1.0));
      const Mat nmat = fd_mass_rate(*model, s, eps) - 2.0 * model->coriolis_matrix(s.q, s.qdot);
      skew.add((nmat + nmat.transpose()).cwiseAbs().maxCoeff());
      rate.add((model->mass_matrix_rate(s.q, s.qdot) - fd_mass_rate(*model, s, eps)).cwiseAbs().maxCoeff());
      const Vec g = model->gravity_vector(s.q);
      const TaskPoint tp = model->task_map(s.q);
      double gerr = 0.0, jerr = 0.0;
      for (int c = 0; c < model->dof(); ++c) {
        Vec e = Vec::Zero(model->dof());
        e[c] = eps;
        const double dp = (model->potential_energy(s.q + e) - model->potential_energy(s.q - e)) / (2.0 * eps);
        gerr = std::max(gerr, std::abs(dp - g[c]));
        const Vec dy = (model->task_map(s.q + e).x - model->task_map(s.q - e).x) / (2.0 * eps);
        jerr = std::max(jerr, (dy - tp.jacobian.col(c)).cwiseAbs().maxCoeff());
      }
      grav.add(gerr);
      jac.add(jerr);
    }
    for (Tally* t : {&spd, &skew, &rate, &grav, &jac}) out.push_back(t->done());
  }

  {
    const ModelPtr arm = make_two_link_arm();
    const KinematicBarrier obstacle = arm_obstacle(arm);
    const EnergyBarrier eb = make_energy_barrier(obstacle, 1.0);
    Rng rng(opt.seed + 7);
    Tally sub(suite, "energy safe set lies inside the kinematic safe set", 0.0);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < opt.instances; ++i) {
      const State s = random_state(rng, arm->default_box());
      const Membership m = membership(eb, s);
      if (m.in_S_D) ++inside;
      sub.add(m.in_S_D && !m.in_S ? 1.0 : 0.0);
    }
    out.push_back(sub.done(std::to_string(inside) + " samples in S_D"));
  }
  return out;
}

std::vector<PropertyResult> bounds_suite(const VerifyOptions& opt) {
  std::vector<PropertyResult> out;
  const char* suite = "bounds";
  const std::size_t held_out = 2000;
  const ModelPtr arm = make_two_link_arm();
  const StateBox arm_box = arm->default_box();
  BoundOptions bo;
  bo.samples = 2000;

  {
    const double bound = bound_estimator(*arm, arm_box, BoundQuantity::half_lambda_max_D, bo).upper;
    Rng rng(opt.seed + 11);
    Tally t(suite, "half lambda_max(D) bound covers held-out samples", 0.0);
    for (std::size_t i = 0; i < held_out; ++i) {
      const Vec q = uniform_vec(rng, arm_box.q_lo, arm_box.q_hi);
      const double l = Eigen::SelfAdjointEigenSolver<Mat>(arm->mass_matrix(q)).eigenvalues().maxCoeff();
      t.add(std::max(0.0, 0.5 * l - bound));
    }
    out.push_back(t.done());
  }
  {
    const double bound = bound_estimator(*arm, arm_box, BoundQuantity::norm_G, bo).upper;
    Rng rng(opt.seed + 12);
    Tally t(suite, "|G| bound covers held-out samples", 0.0);
    for (std::size_t i = 0; i < held_out; ++i) {
      const Vec q = uniform_vec(rng, arm_box.q_lo, arm_box.q_hi);
      t.add(std::max(0.0, arm->gravity_vector(q).norm() - bound));
    }
    out.push_back(t.done());
  }

  // Cart-pole with a one-sided angle limit, on a box that stays clear of
  // the upright singularity of the complement coordinates.
  const ModelPtr cp = make_cart_pole();
  const KinematicBarrier limit = barrier_catalog(AngleLimit{5.0 * std::numbers::pi / 6.0, true, 1}, cp);
  const UnderactuatedBarrier ub = make_underactuated_barrier(limit, select_coordinates(2, {0}), 1.0);
  Vec qlo(2), qhi(2);
  qlo << -5.0, 2.4;
  qhi << 5.0, 3.9;
  const StateBox cp_box{qlo, qhi, Vec::Constant(2, -5.0), Vec::Constant(2, 5.0)};
  const BoundEstimate dh = bound_estimator(*cp, cp_box, BoundQuantity::D_h_bounds, bo, &ub);
  {
    Rng rng(opt.seed + 13);
    Tally t(suite, "D_h bounds cover held-out samples", 0.0);
    for (std::size_t i = 0; i < held_out; ++i) {
      const State s = random_state(rng, cp_box);
      SchurReduction r;
      try {
        r = schur_reduce(*cp, limit, ub.complement, s.q, s.qdot);
      } catch (const Error&) {
        t.skip();
        continue;
      }
      const double v = s.qdot.norm();
      double excess = std::max({dh.lower - r.D_h, r.D_h - dh.upper, std::abs(r.G_h) - dh.upper,
                                r.C_h.norm() - dh.upper * v, std::abs(r.D_h_rate) - dh.upper * v});
      t.add(std::max(0.0, excess));
    }
    out.push_back(t.done());
  }

  {
    const double c_u = 5.0 * 2.0 * bound_estimator(*arm, arm_box, BoundQuantity::half_lambda_max_D,
                                                   BoundOptions{1.0, 2000, 1})
                                       .upper;
    const double c_u_drop =
        std::max(c_u, bound_estimator(*arm, arm_box, BoundQuantity::norm_G, bo).upper);
    const KinematicBarrier obstacle = arm_obstacle(arm);
    Rng rng(opt.seed + 14);
    Tally keep(suite, "robust torque constraint implies exact (keep gravity)", 1e-9);
    Tally drop(suite, "robust torque constraint implies exact (drop gravity)", 1e-9);
    for (std::size_t i = 0; i < opt.instances; ++i) {
      const State s = random_state(rng, arm_box);
      const EnergyBarrier eb = make_energy_barrier(obstacle, uniform(rng, 0.5, 20.0));
      const ClassKappa a = random_alpha(rng);
      const Vec u = normal_vec(rng, 2, 20.0);
      const double exact = torque_constraint_margin(eb, s, a, u);
      keep.add(robust_torque_constraint_margin(eb, s, a, u, c_u, GravityMode::keep_gravity) - exact);
      drop.add(robust_torque_constraint_margin(eb, s, a, u, c_u_drop, GravityMode::drop_gravity) - exact);
    }
    out.push_back(keep.done());
    out.push_back(drop.done());
  }
  {
    Rng rng(opt.seed + 15);
    Tally t(suite, "robust underactuated constraint implies exact", 1e-9);
    const UnderactuatedBounds bounds{dh.lower, dh.upper};
    for (std::size_t i = 0; i < opt.instances; ++i) {
      const State s = random_state(rng, cp_box);
      const ClassKappa a = make_class_kappa(ClassKappa::Kind::linear, uniform(rng, 0.1, 10.0));
      const Vec u = normal_vec(rng, 1, 20.0);
      double exact, robust;
      try {
        exact = underactuated_constraint_margin(ub, s, a, u);
        robust = robust_underactuated_constraint_margin(ub, s, a, u, bounds);
      } catch (const Error&) {
        t.skip();
        continue;
      }
      t.add(robust - exact);
    }
    out.push_back(t.done(dh.warning));
  }

  {
    Rng rng(opt.seed + 16);
    Tally t(suite, "AVX2 kernels match scalar reference bit for bit", 0.0);
    const bool have = kernels::avx2_available();
    for (int rep = 0; rep < 20; ++rep) {
      const int m = 1 + rep % 4;
      const std::size_t cnt = 1 + rng() % 257;
      std::vector<double> ud(m * cnt), a(m * cnt), b(cnt);
      for (auto& x : ud) x = uniform(rng, -10, 10);
      for (auto& x : a) x = uniform(rng, -3, 3);
      for (auto& x : b) x = uniform(rng, -10, 10);
      std::vector<double> u1(m * cnt), u2(m * cnt), m1(cnt), m2(cnt);
      kernels::project_halfspace(m, ud, a, b, u1, m1, kernels::Isa::scalar);
      kernels::project_halfspace(m, ud, a, b, u2, m2, kernels::Isa::avx2);
      double diff = 0.0;
      for (std::size_t i = 0; i < u1.size(); ++i) diff = std::max(diff, u1[i] == u2[i] ? 0.0 : 1.0);
      for (std::size_t i = 0; i < cnt; ++i) diff = std::max(diff, m1[i] == m2[i] ? 0.0 : 1.0);
      t.add(diff);
    }
    out.push_back(t.done(have ? "avx2 active" : "avx2 unavailable, scalar compared with itself"));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"models", "filters", "bounds", "all"};
  return names;
}

std::vector<PropertyResult> run_suite(const std::string& suite, const VerifyOptions& options) {
  if (suite == "models") return models_suite(options);
  if (suite == "filters") return filters_suite(options);
  if (suite == "bounds") return bounds_suite(options);
  if (suite == "all") {
    std::vector<PropertyResult> all = models_suite(options);
    for (auto& r : filters_suite(options)) all.push_back(std::move(r));
    for (auto& r : bounds_suite(options)) all.push_back(std::move(r));
    return all;
  }
  throw ParameterError("unknown suite '" + suite + "'");
}

bool all_passed(const std::vector<PropertyResult>& results) {
  for (const auto& r : results)
    if (!r.passed) return false;
  return true;
}

std::string format_results(const std::vector<PropertyResult>& results) {
  std::ostringstream os;
  os << std::setprecision(3);
  for (const auto& r : results) {
    os << (r.passed ? "PASS " : "FAIL ") << '[' << r.suite << "] " << r.name << ": "
       << r.checked - r.failures << '/' << r.checked << " ok, worst " << r.worst << " ("
       << r.detail << ")\n";
  }
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  os << results.size() - failed << '/' << results.size() << " properties passed\n";
  return os.str();
}

}  // namespace cbf
