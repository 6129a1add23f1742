#include "cbf/models.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cbf/errors.hpp"

namespace cbf {

namespace {

Vec filled(int n, double v) { return Vec::Constant(n, v); }

class DoubleIntegrator final : public RobotModel {
 public:
  DoubleIntegrator(const DoubleIntegratorParams& p, bool gravity) : RobotModel(gravity), p_(p) {
    if (!(p_.mass > 0.0)) throw ParameterError("double_integrator: mass must be positive");
  }

  std::string_view name() const override { return "double_integrator"; }
  int dof() const override { return 1; }
  int inputs() const override { return 1; }
  int task_dim() const override { return 1; }

  StateBox default_box() const override {
    return {filled(1, -5.0), filled(1, 5.0), filled(1, -5.0), filled(1, 5.0)};
  }
  ParamMap params() const override { return {{"mass", p_.mass}}; }

 protected:
  Mat do_mass_matrix(const Vec&) const override { return Mat::Constant(1, 1, p_.mass); }
  Mat do_mass_matrix_rate(const Vec&, const Vec&) const override { return Mat::Zero(1, 1); }
  Mat do_coriolis(const Vec&, const Vec&) const override { return Mat::Zero(1, 1); }
  Vec do_gravity(const Vec&) const override { return Vec::Zero(1); }
  double do_potential(const Vec&) const override { return 0.0; }
  Mat do_actuation(const Vec&) const override { return Mat::Identity(1, 1); }
  TaskPoint do_task_map(const Vec& q) const override { return {q, Mat::Identity(1, 1)}; }
  std::vector<Mat> do_task_hessians(const Vec&) const override { return {Mat::Zero(1, 1)}; }

 private:
  DoubleIntegratorParams p_;
};

class TwoLinkArm final : public RobotModel {
 public:
  TwoLinkArm(const TwoLinkArmParams& p, bool gravity) : RobotModel(gravity), p_(p) {
    if (!(p_.m1 > 0.0 && p_.m2 > 0.0 && p_.l1 > 0.0 && p_.l2 > 0.0))
      throw ParameterError("two_link_arm: masses and lengths must be positive");
    if (!(p_.g >= 0.0)) throw ParameterError("two_link_arm: g must be non-negative");
  }

  std::string_view name() const override { return "two_link_arm"; }
  int dof() const override { return 2; }
  int inputs() const override { return 2; }
  int task_dim() const override { return 2; }

  StateBox default_box() const override {
    using std::numbers::pi;
    return {filled(2, -pi), filled(2, pi), filled(2, -5.0), filled(2, 5.0)};
  }
  ParamMap params() const override {
    return {{"m1", p_.m1}, {"m2", p_.m2}, {"l1", p_.l1}, {"l2", p_.l2}, {"g", p_.g}};
  }

 protected:
  Mat do_mass_matrix(const Vec& q) const override {
    const double c2 = std::cos(q[1]);
    const auto& [m1, m2, l1, l2, g] = p_;
    Mat d(2, 2);
    d(0, 0) = m1 * l1 * l1 + m2 * (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * c2);
    d(0, 1) = m2 * (l2 * l2 + l1 * l2 * c2);
    d(1, 0) = d(0, 1);
    d(1, 1) = m2 * l2 * l2;
    return d;
  }

  Mat do_mass_matrix_rate(const Vec& q, const Vec& qd) const override {
    const double hh = -p_.m2 * p_.l1 * p_.l2 * std::sin(q[1]);
    Mat dd(2, 2);
    dd << 2.0 * hh * qd[1], hh * qd[1], hh * qd[1], 0.0;
    return dd;
  }

  // Christoffel form, so that Ddot - 2C is skew.
  Mat do_coriolis(const Vec& q, const Vec& qd) const override {
    const double hh = -p_.m2 * p_.l1 * p_.l2 * std::sin(q[1]);
    Mat c(2, 2);
    c << hh * qd[1], hh * (qd[0] + qd[1]), -hh * qd[0], 0.0;
    return c;
  }

  Vec do_gravity(const Vec& q) const override {
    const double c1 = std::cos(q[0]);
    const double c12 = std::cos(q[0] + q[1]);
    Vec g(2);
    g[0] = (p_.m1 + p_.m2) * p_.g * p_.l1 * c1 + p_.m2 * p_.g * p_.l2 * c12;
    g[1] = p_.m2 * p_.g * p_.l2 * c12;
    return g;
  }

  double do_potential(const Vec& q) const override {
    const double s1 = std::sin(q[0]);
    const double s12 = std::sin(q[0] + q[1]);
    return p_.m1 * p_.g * p_.l1 * s1 + p_.m2 * p_.g * (p_.l1 * s1 + p_.l2 * s12);
  }

  Mat do_actuation(const Vec&) const override { return Mat::Identity(2, 2); }

  TaskPoint do_task_map(const Vec& q) const override {
    const double c1 = std::cos(q[0]), s1 = std::sin(q[0]);
    const double c12 = std::cos(q[0] + q[1]), s12 = std::sin(q[0] + q[1]);
    const double l1 = p_.l1, l2 = p_.l2;
    TaskPoint tp{Vec(2), Mat(2, 2)};
    tp.x << l1 * c1 + l2 * c12, l1 * s1 + l2 * s12;
    tp.jacobian << -l1 * s1 - l2 * s12, -l2 * s12, l1 * c1 + l2 * c12, l2 * c12;
    return tp;
  }

  std::vector<Mat> do_task_hessians(const Vec& q) const override {
    const double c1 = std::cos(q[0]), s1 = std::sin(q[0]);
    const double c12 = std::cos(q[0] + q[1]), s12 = std::sin(q[0] + q[1]);
    const double l1 = p_.l1, l2 = p_.l2;
    Mat hx(2, 2), hy(2, 2);
    hx << -l1 * c1 - l2 * c12, -l2 * c12, -l2 * c12, -l2 * c12;
    hy << -l1 * s1 - l2 * s12, -l2 * s12, -l2 * s12, -l2 * s12;
    return {hx, hy};
  }

 private:
  TwoLinkArmParams p_;
};

class CartPole final : public RobotModel {
 public:
  CartPole(const CartPoleParams& p, bool gravity) : RobotModel(gravity), p_(p) {
    if (!(p_.cart_mass > 0.0 && p_.pole_mass > 0.0 && p_.pole_length > 0.0))
      throw ParameterError("cart_pole: masses and length must be positive");
    if (!(p_.g >= 0.0)) throw ParameterError("cart_pole: g must be non-negative");
  }

  std::string_view name() const override { return "cart_pole"; }
  int dof() const override { return 2; }
  int inputs() const override { return 1; }
  int task_dim() const override { return 1; }

  StateBox default_box() const override {
    using std::numbers::pi;
    Vec qlo(2), qhi(2);
    qlo << -5.0, 0.0;
    qhi << 5.0, 2.0 * pi;
    return {qlo, qhi, filled(2, -5.0), filled(2, 5.0)};
  }
  ParamMap params() const override {
    return {{"cart_mass", p_.cart_mass},
            {"pole_mass", p_.pole_mass},
            {"pole_length", p_.pole_length},
            {"g", p_.g}};
  }

 protected:
  Mat do_mass_matrix(const Vec& q) const override {
    const double ml = p_.pole_mass * p_.pole_length;
    Mat d(2, 2);
    d << p_.cart_mass + p_.pole_mass, ml * std::cos(q[1]), ml * std::cos(q[1]),
        ml * p_.pole_length;
    return d;
  }

  Mat do_mass_matrix_rate(const Vec& q, const Vec& qd) const override {
    const double r = -p_.pole_mass * p_.pole_length * std::sin(q[1]) * qd[1];
    Mat dd(2, 2);
    dd << 0.0, r, r, 0.0;
    return dd;
  }

  Mat do_coriolis(const Vec& q, const Vec& qd) const override {
    Mat c = Mat::Zero(2, 2);
    c(0, 1) = -p_.pole_mass * p_.pole_length * std::sin(q[1]) * qd[1];
    return c;
  }

  Vec do_gravity(const Vec& q) const override {
    Vec g(2);
    g << 0.0, p_.pole_mass * p_.g * p_.pole_length * std::sin(q[1]);
    return g;
  }

  double do_potential(const Vec& q) const override {
    return -p_.pole_mass * p_.g * p_.pole_length * std::cos(q[1]);
  }

  Mat do_actuation(const Vec&) const override {
    Mat b(2, 1);
    b << 1.0, 0.0;
    return b;
  }

  // Output: cart position.
  TaskPoint do_task_map(const Vec& q) const override {
    TaskPoint tp{Vec(1), Mat(1, 2)};
    tp.x << q[0];
    tp.jacobian << 1.0, 0.0;
    return tp;
  }

  std::vector<Mat> do_task_hessians(const Vec&) const override { return {Mat::Zero(2, 2)}; }

 private:
  CartPoleParams p_;
};

double take(ParamMap& m, const char* key, double fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  const double v = it->second;
  m.erase(it);
  return v;
}

}  // namespace

bool StateBox::contains(const State& s) const {
  for (int i = 0; i < dof(); ++i) {
    if (s.q[i] < q_lo[i] || s.q[i] > q_hi[i]) return false;
    if (s.qdot[i] < qdot_lo[i] || s.qdot[i] > qdot_hi[i]) return false;
  }
  return true;
}

void RobotModel::check_config(const Vec& q) const {
  if (q.size() != dof()) throw DomainError(std::string(name()) + ": configuration has wrong size");
  if (!q.allFinite()) throw DomainError(std::string(name()) + ": non-finite configuration");
}

void RobotModel::check_velocity(const Vec& qdot) const {
  if (qdot.size() != dof()) throw DomainError(std::string(name()) + ": velocity has wrong size");
  if (!qdot.allFinite()) throw DomainError(std::string(name()) + ": non-finite velocity");
}

Mat RobotModel::mass_matrix(const Vec& q) const {
  check_config(q);
  return do_mass_matrix(q);
}

Mat RobotModel::mass_matrix_rate(const Vec& q, const Vec& qdot) const {
  check_config(q);
  check_velocity(qdot);
  return do_mass_matrix_rate(q, qdot);
}

Mat RobotModel::coriolis_matrix(const Vec& q, const Vec& qdot) const {
  check_config(q);
  check_velocity(qdot);
  return do_coriolis(q, qdot);
}

Vec RobotModel::gravity_vector(const Vec& q) const {
  check_config(q);
  if (!gravity_enabled_) return Vec::Zero(dof());
  return do_gravity(q);
}

double RobotModel::potential_energy(const Vec& q) const {
  check_config(q);
  return gravity_enabled_ ? do_potential(q) : 0.0;
}

double RobotModel::kinetic_energy(const State& s) const {
  return 0.5 * s.qdot.dot(mass_matrix(s.q) * s.qdot);
}

Mat RobotModel::actuation_matrix(const Vec& q) const {
  check_config(q);
  return do_actuation(q);
}

Vec RobotModel::forward_dynamics(const State& s, const Vec& u) const {
  check_config(s.q);
  check_velocity(s.qdot);
  if (u.size() != inputs()) throw DomainError(std::string(name()) + ": input has wrong size");
  if (!u.allFinite()) throw DomainError(std::string(name()) + ": non-finite input");
  const Mat d = do_mass_matrix(s.q);
  Vec rhs = do_actuation(s.q) * u - do_coriolis(s.q, s.qdot) * s.qdot;
  if (gravity_enabled_) rhs -= do_gravity(s.q);
  Eigen::LLT<Mat> llt(d);
  if (llt.info() != Eigen::Success)
    throw DomainError(std::string(name()) + ": mass matrix is not positive definite");
  return llt.solve(rhs);
}

TaskPoint RobotModel::task_map(const Vec& q) const {
  check_config(q);
  return do_task_map(q);
}

std::vector<Mat> RobotModel::task_hessians(const Vec& q) const {
  check_config(q);
  return do_task_hessians(q);
}

ModelPtr make_double_integrator(const DoubleIntegratorParams& p, bool gravity) {
  return std::make_shared<DoubleIntegrator>(p, gravity);
}

ModelPtr make_two_link_arm(const TwoLinkArmParams& p, bool gravity) {
  return std::make_shared<TwoLinkArm>(p, gravity);
}

ModelPtr make_cart_pole(const CartPoleParams& p, bool gravity) {
  return std::make_shared<CartPole>(p, gravity);
}

const std::vector<std::string>& model_ids() {
  static const std::vector<std::string> ids{"double_integrator", "two_link_arm", "cart_pole"};
  return ids;
}

ModelPtr make_model(std::string_view id, const ParamMap& overrides) {
  ParamMap rest = overrides;
  const bool gravity = take(rest, "gravity", 1.0) != 0.0;
  ModelPtr model;
  if (id == "double_integrator") {
    DoubleIntegratorParams p;
    p.mass = take(rest, "mass", p.mass);
    model = make_double_integrator(p, gravity);
  } else if (id == "two_link_arm") {
    TwoLinkArmParams p;
    p.m1 = take(rest, "m1", p.m1);
    p.m2 = take(rest, "m2", p.m2);
    p.l1 = take(rest, "l1", p.l1);
    p.l2 = take(rest, "l2", p.l2);
    p.g = take(rest, "g", p.g);
    model = make_two_link_arm(p, gravity);
  } else if (id == "cart_pole") {
    CartPoleParams p;
    p.cart_mass = take(rest, "cart_mass", p.cart_mass);
    p.pole_mass = take(rest, "pole_mass", p.pole_mass);
    p.pole_length = take(rest, "pole_length", p.pole_length);
    p.g = take(rest, "g", p.g);
    model = make_cart_pole(p, gravity);
  } else {
    throw ParameterError("unknown model '" + std::string(id) + "'");
  }
  if (!rest.empty())
    throw ParameterError("unknown parameter '" + rest.begin()->first + "' for model " +
                         std::string(id));
  return model;
}

}  // namespace cbf
