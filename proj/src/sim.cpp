#include "cbf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>

#include "cbf/config.hpp"
#include "cbf/errors.hpp"
#include "cbf/qp_oracle.hpp"

namespace cbf {

const char* to_string(FilterKind k) {
  switch (k) {
    case FilterKind::none: return "none";
    case FilterKind::velocity: return "velocity";
    case FilterKind::torque: return "torque";
    case FilterKind::robust_torque: return "robust_torque";
    case FilterKind::velocity_command: return "velocity_command";
    case FilterKind::underactuated: return "underactuated";
    case FilterKind::robust_underactuated: return "robust_underactuated";
  }
  return "?";
}

FilterKind filter_kind_from_string(const std::string& s) {
  for (FilterKind k : {FilterKind::none, FilterKind::velocity, FilterKind::torque,
                       FilterKind::robust_torque, FilterKind::velocity_command,
                       FilterKind::underactuated, FilterKind::robust_underactuated}) {
    if (s == to_string(k)) return k;
  }
  throw ParameterError("unknown filter '" + s + "'");
}

const char* to_string(TaskSpec::Kind k) {
  switch (k) {
    case TaskSpec::Kind::setpoint: return "setpoint";
    case TaskSpec::Kind::line: return "line";
    case TaskSpec::Kind::circle: return "circle";
    case TaskSpec::Kind::joint_setpoint: return "joint_setpoint";
    case TaskSpec::Kind::constant_input: return "constant_input";
    case TaskSpec::Kind::sinusoid_input: return "sinusoid_input";
  }
  return "?";
}

TaskSpec::Kind task_kind_from_string(const std::string& s) {
  using K = TaskSpec::Kind;
  for (K k : {K::setpoint, K::line, K::circle, K::joint_setpoint, K::constant_input,
              K::sinusoid_input}) {
    if (s == to_string(k)) return k;
  }
  throw ParameterError("unknown task '" + s + "'");
}

namespace {

bool is_kinematic(FilterKind k) { return k == FilterKind::none || k == FilterKind::velocity; }
bool is_underactuated(FilterKind k) {
  return k == FilterKind::underactuated || k == FilterKind::robust_underactuated;
}

std::size_t step_count(const Scenario& s) {
  return static_cast<std::size_t>(std::llround(s.horizon / s.dt));
}

TrackingTask make_tracking(const TaskSpec& t) {
  switch (t.kind) {
    case TaskSpec::Kind::setpoint: return setpoint_task(t.point, t.lambda, false);
    case TaskSpec::Kind::joint_setpoint: return setpoint_task(t.point, t.lambda, true);
    case TaskSpec::Kind::line: return line_task(t.point, t.velocity, t.lambda);
    case TaskSpec::Kind::circle:
      return circle_task(t.point, t.radius, t.omega, t.phase, t.lambda);
    default: break;
  }
  throw ParameterError("task is not a tracking task");
}

StateBox scenario_box(const Scenario& s, const RobotModel& model) {
  return s.box ? *s.box : model.default_box();
}

// Everything a run needs, built once from the scenario.
struct Loop {
  ModelPtr model;
  EnergyBarrier energy;
  std::optional<UnderactuatedBarrier> under;
  std::optional<TrackingTask> tracking;
  Mat k_vel;
  double c_u = 0.0;
  double c_l = 0.0;
};

BoundEstimate cached_bound(const RobotModel& model, const StateBox& box, BoundQuantity q,
                           const BoundOptions& opt, const UnderactuatedBarrier* reduced,
                           const std::string& descriptor, const RunOptions& options) {
  if (options.bound_cache.empty()) return bound_estimator(model, box, q, opt, reduced);
  // Parallel runs share the sidecar file.
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  BoundCache cache(options.bound_cache);
  const std::string key = BoundCache::make_key(model, box, q, opt, descriptor);
  if (auto hit = cache.lookup(key)) return *hit;
  BoundEstimate e = bound_estimator(model, box, q, opt, reduced);
  cache.store(key, e);
  return e;
}

Loop build_loop(const Scenario& sc, const RunOptions& options, bool with_bounds = true) {
  ModelPtr model = make_model(sc.model_id, sc.model_params);
  validate(sc, *model);
  KinematicBarrier kin = barrier_catalog(sc.barrier, model);
  Loop loop{model, make_energy_barrier(kin, sc.filter.alpha_e), std::nullopt, std::nullopt,
            Mat::Identity(model->dof(), model->dof()) * sc.filter.k_vel};
  if (!sc.task.is_input()) loop.tracking = make_tracking(sc.task);
  if (is_underactuated(sc.filter.kind)) {
    loop.under = make_underactuated_barrier(
        kin, select_coordinates(model->dof(), sc.filter.complement), sc.filter.alpha_e);
  }

  if (!with_bounds) return loop;
  const FilterSpec& f = sc.filter;
  const StateBox box = scenario_box(sc, *model);
  BoundOptions opt;
  opt.safety_factor = f.bound_factor;
  opt.samples = f.bound_samples;
  if (f.kind == FilterKind::robust_torque) {
    if (f.c_u > 0.0) {
      loop.c_u = f.c_u;
    } else {
      BoundOptions unit = opt;
      unit.safety_factor = 1.0;
      const double lambda_hat =
          2.0 * cached_bound(*model, box, BoundQuantity::half_lambda_max_D, unit, nullptr, {},
                             options)
                    .upper;
      loop.c_u = f.c_u_factor * lambda_hat;
      if (f.mode == GravityMode::drop_gravity) {
        const double g = cached_bound(*model, box, BoundQuantity::norm_G, opt, nullptr, {},
                                      options)
                             .upper;
        loop.c_u = std::max(loop.c_u, g);
      }
    }
  } else if (f.kind == FilterKind::robust_underactuated) {
    if (f.c_u > 0.0 && f.c_l > 0.0) {
      loop.c_u = f.c_u;
      loop.c_l = f.c_l;
    } else {
      const BoundEstimate e = cached_bound(*model, box, BoundQuantity::D_h_bounds, opt,
                                           &*loop.under, describe(sc.barrier), options);
      loop.c_l = f.c_l > 0.0 ? f.c_l : e.lower;
      loop.c_u = f.c_u > 0.0 ? f.c_u : e.upper;
    }
  }
  return loop;
}

double certified_value(const Scenario& sc, const Loop& loop, const State& s) {
  if (is_kinematic(sc.filter.kind)) return loop.energy.kin.value(s.q);
  if (is_underactuated(sc.filter.kind)) return underactuated_h_hat(*loop.under, s);
  return energy_h_D(loop.energy, s);
}

Vec desired_input(const Scenario& sc, const RobotModel& model, double t, const State& s) {
  const double v = sc.task.kind == TaskSpec::Kind::sinusoid_input
                       ? sc.task.offset + sc.task.amplitude *
                                              std::sin(2.0 * std::numbers::pi * sc.task.frequency * t)
                       : sc.task.offset;
  Vec u = Vec::Constant(model.inputs(), v);
  if (sc.task.damping != 0.0)
    u -= sc.task.damping * (model.actuation_matrix(s.q).transpose() * s.qdot);
  return u;
}

// Joint torque -> input through the least-squares inverse of B.
Vec to_input(const RobotModel& model, const Vec& q, const Vec& tau) {
  return model.actuation_matrix(q).completeOrthogonalDecomposition().solve(tau);
}

struct Step {
  Vec command;
  Vec u;
  FilterOutput out;
};

Step control(const Scenario& sc, const Loop& loop, double t, const State& s,
             const RunOptions& options) {
  const RobotModel& model = *loop.model;
  const FilterSpec& f = sc.filter;
  Step st;

  Vec qdot_des;
  Vec u_des;
  if (loop.tracking) {
    qdot_des = tracking_qdot_des(model, s.q, t, *loop.tracking);
    const double speed = qdot_des.norm();
    if (sc.task.max_speed > 0.0 && speed > sc.task.max_speed) qdot_des *= sc.task.max_speed / speed;
    u_des = to_input(model, s.q, model.gravity_vector(s.q) + low_level_pd(s.qdot, qdot_des, loop.k_vel));
  } else {
    u_des = desired_input(sc, model, t, s);
  }

  const auto low_level = [&](const Vec& qdot_cmd) {
    Vec tau = low_level_pd(s.qdot, qdot_cmd, loop.k_vel);
    if (f.gravity_compensation) tau += model.gravity_vector(s.q);
    return to_input(model, s.q, tau);
  };

  switch (f.kind) {
    case FilterKind::none:
      st.out.command = loop.tracking ? qdot_des : u_des;
      st.out.barrier = loop.energy.kin.value(s.q);
      st.u = loop.tracking ? low_level(qdot_des) : u_des;
      break;
    case FilterKind::velocity:
      if (!loop.tracking) throw ParameterError("velocity filter needs a tracking task");
      st.out = velocity_filter(loop.energy.kin, s.q, f.alpha, qdot_des, options.fault);
      st.u = low_level(st.out.command);
      break;
    case FilterKind::torque:
      st.out = torque_filter(loop.energy, s, f.alpha, u_des, options.fault);
      st.u = st.out.command;
      break;
    case FilterKind::robust_torque:
      st.out = robust_torque_filter(loop.energy, s, f.alpha, u_des, loop.c_u, f.mode, options.fault);
      st.u = st.out.command;
      break;
    case FilterKind::velocity_command: {
      if (!loop.tracking) throw ParameterError("velocity_command filter needs a tracking task");
      st.out = velocity_command_filter(loop.energy, s, f.alpha, loop.k_vel, qdot_des,
                                       f.gravity_precompensation, options.fault);
      Vec tau = low_level_pd(s.qdot, st.out.command, loop.k_vel);
      st.u = f.gravity_precompensation
                 ? Vec(tau + model.actuation_matrix(s.q).partialPivLu().solve(model.gravity_vector(s.q)))
                 : tau;
      break;
    }
    case FilterKind::underactuated:
      st.out = underactuated_filter(*loop.under, s, f.alpha, u_des, options.fault);
      st.u = st.out.command;
      break;
    case FilterKind::robust_underactuated:
      st.out = robust_underactuated_filter(*loop.under, s, f.alpha, u_des, {loop.c_l, loop.c_u},
                                           options.fault);
      st.u = st.out.command;
      break;
  }
  st.command = st.out.command;
  return st;
}

Vec task_error(const Scenario& sc, const RobotModel& model, const TrackingTask& task,
               const Record& r) {
  const Vec y = task.joint_space ? r.q : model.task_map(r.q).x;
  (void)sc;
  return y - task.x_d(r.t);
}

}  // namespace

void validate(const Scenario& s, const RobotModel& model) {
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw ParameterError("dt must be positive");
  if (!(s.horizon >= s.dt) || !std::isfinite(s.horizon))
    throw ParameterError("horizon must be at least dt");
  if (!(s.tol >= 0.0)) throw ParameterError("tol must be nonnegative");
  if (!(s.filter.k_vel > 0.0)) throw ParameterError("k_vel must be positive");
  if (!(s.filter.alpha.gain > 0.0)) throw ParameterError("alpha gain must be positive");
  if (!(s.filter.alpha_e > 0.0)) throw ParameterError("alpha_e must be positive");
  if (!(s.initial.margin >= 0.0)) throw ParameterError("initial margin must be nonnegative");
  const int k = model.dof();
  if (!s.initial.random && (s.initial.q.size() != k || s.initial.qdot.size() != k))
    throw ParameterError("initial state must have " + std::to_string(k) + " coordinates");
  if (s.box && s.box->dof() != k) throw ParameterError("box dimension differs from model");
  if (s.initial.q_lo.size() != s.initial.q_hi.size() ||
      (s.initial.q_lo.size() != 0 && s.initial.q_lo.size() != k))
    throw ParameterError("initial q_lo and q_hi need " + std::to_string(k) + " coordinates each");
  if (s.initial.q_lo.size() != 0 && !(s.initial.q_lo.array() <= s.initial.q_hi.array()).all())
    throw ParameterError("initial q_lo must not exceed q_hi");
  if (!s.task.is_input()) {
    const int dim = s.task.kind == TaskSpec::Kind::joint_setpoint ? k : model.task_dim();
    if (s.task.point.size() != dim) throw ParameterError("task point has the wrong dimension");
    if (s.task.kind == TaskSpec::Kind::line && s.task.velocity.size() != dim)
      throw ParameterError("task velocity has the wrong dimension");
    if (!(s.task.lambda > 0.0)) throw ParameterError("task lambda must be positive");
    if (!(s.task.max_speed >= 0.0)) throw ParameterError("task max_speed must be nonnegative");
  } else if (!(s.task.damping >= 0.0)) {
    throw ParameterError("task damping must be nonnegative");
  }
  if (is_underactuated(s.filter.kind) &&
      static_cast<int>(s.filter.complement.size()) != k - 1)
    throw ParameterError("complement needs dof - 1 coordinates");
}

State rk4_step(const RobotModel& model, const State& s, const Vec& u, double dt) {
  if (!(dt > 0.0)) throw ParameterError("rk4_step: dt must be positive");
  const auto f = [&](const State& x) { return model.forward_dynamics(x, u); };
  const auto shift = [](const State& x, const Vec& dq, const Vec& dv, double h) {
    return State{x.q + h * dq, x.qdot + h * dv};
  };
  const Vec a1 = f(s);
  const State s2 = shift(s, s.qdot, a1, 0.5 * dt);
  const Vec a2 = f(s2);
  const State s3 = shift(s, s2.qdot, a2, 0.5 * dt);
  const Vec a3 = f(s3);
  const State s4 = shift(s, s3.qdot, a3, dt);
  const Vec a4 = f(s4);
  State next;
  next.q = s.q + (dt / 6.0) * (s.qdot + 2.0 * s2.qdot + 2.0 * s3.qdot + s4.qdot);
  next.qdot = s.qdot + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  if (!all_finite(next.q) || !all_finite(next.qdot))
    throw DivergenceError("integration produced a non-finite state");
  return next;
}

// Robust filters certify the tightened set -c_u |v|^2 + alpha_e h >= 0, which
// sits inside the exact one; v is qdot (torque) or hdot (underactuated).
std::optional<double> tightened_value(const Scenario& sc, const Loop& loop, const State& s) {
  if (sc.filter.kind == FilterKind::robust_torque)
    return -loop.c_u * s.qdot.squaredNorm() + sc.filter.alpha_e * loop.energy.kin.value(s.q);
  if (sc.filter.kind == FilterKind::robust_underactuated) {
    const double hdot = loop.under->kin.gradient(s.q).dot(s.qdot);
    return -loop.c_u * hdot * hdot + sc.filter.alpha_e * loop.under->kin.value(s.q);
  }
  return std::nullopt;
}

State sample_initial_state(const Scenario& sc, const Loop& loop, std::uint64_t seed) {
  const RobotModel* model = loop.model.get();
  const StateBox box = scenario_box(sc, *model);
  const int k = model->dof();
  const Vec lo = sc.initial.q_lo.size() ? sc.initial.q_lo : box.q_lo;
  const Vec hi = sc.initial.q_hi.size() ? sc.initial.q_hi : box.q_hi;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double margin = sc.initial.margin;
  const double h_floor = is_kinematic(sc.filter.kind) ? margin : margin / sc.filter.alpha_e;

  for (int attempt = 0; attempt < 200000; ++attempt) {
    State s{Vec(k), Vec::Zero(k)};
    for (int i = 0; i < k; ++i) s.q[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    if (!(loop.energy.kin.value(s.q) > h_floor)) continue;
    if (sc.initial.velocity_scale > 0.0) {
      for (int i = 0; i < k; ++i) s.qdot[i] = sc.initial.velocity_scale * normal(rng);
    }
    try {
      if (is_underactuated(sc.filter.kind)) {
        // Stay where the input reaches the barrier coordinate.
        schur_reduce(*model, loop.under->kin, loop.under->complement, s.q, s.qdot);
      }
      const auto tight = tightened_value(sc, loop, s);
      if (tight && *tight < margin) continue;
      if (certified_value(sc, loop, s) >= margin) return s;
    } catch (const Error&) {
      continue;
    }
  }
  throw ParameterError("could not sample an initial state in the safe set");
}

State sample_initial_state(const Scenario& sc, std::uint64_t seed) {
  const bool robust = sc.filter.kind == FilterKind::robust_torque ||
                      sc.filter.kind == FilterKind::robust_underactuated;
  return sample_initial_state(sc, build_loop(sc, RunOptions{}, robust), seed);
}

Metrics compute_metrics(const Scenario& sc, const Trace& trace) {
  Metrics m;
  m.records = trace.records.size();
  m.completed = !trace.error.has_value();
  if (trace.records.empty()) return m;
  m.min_h = m.min_h_D = m.min_certified = std::numeric_limits<double>::infinity();
  std::size_t interventions = 0;
  for (const Record& r : trace.records) {
    m.min_h = std::min(m.min_h, r.h);
    m.min_h_D = std::min(m.min_h_D, r.h_D);
    m.min_certified = std::min(m.min_certified, r.certified);
    if (r.certified < -sc.tol) ++m.violation_steps;
    if (r.intervened) ++interventions;
    m.max_command_norm = std::max(m.max_command_norm, r.command.norm());
  }
  m.intervention_fraction = static_cast<double>(interventions) / static_cast<double>(m.records);
  if (!sc.task.is_input()) {
    ModelPtr model = make_model(sc.model_id, sc.model_params);
    const TrackingTask task = make_tracking(sc.task);
    double sum = 0.0;
    for (const Record& r : trace.records) sum += task_error(sc, *model, task, r).squaredNorm();
    m.tracking_rms = std::sqrt(sum / static_cast<double>(m.records));
  }
  return m;
}

RunResult run(const Scenario& sc, const RunOptions& options) {
  RunResult res;
  res.trace.meta.scenario_hash = scenario_hash(sc);
  const Loop loop = build_loop(sc, options);
  res.trace.meta.c_u = loop.c_u;
  res.trace.meta.c_l = loop.c_l;

  State s = sc.initial.random ? sample_initial_state(sc, loop, sc.seed)
                              : State{sc.initial.q, sc.initial.qdot};
  try {
    res.trace.meta.initial_outside_safe_set = certified_value(sc, loop, s) < 0.0;
  } catch (const Error&) {
    res.trace.meta.initial_outside_safe_set = true;
  }

  const std::size_t n = step_count(sc);
  res.trace.records.reserve(n + 1);
  try {
    for (std::size_t i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) * sc.dt;
      Step st = control(sc, loop, t, s, options);
      Record r;
      r.t = t;
      r.q = s.q;
      r.qdot = s.qdot;
      r.command = st.command;
      r.u = st.u;
      r.h = loop.energy.kin.value(s.q);
      r.h_D = is_underactuated(sc.filter.kind) ? st.out.barrier : energy_h_D(loop.energy, s);
      r.psi = st.out.psi;
      r.intervened = st.out.intervened;
      r.certified = is_kinematic(sc.filter.kind) ? r.h : r.h_D;
      res.trace.records.push_back(std::move(r));
      if (i == n) break;
      s = rk4_step(*loop.model, s, st.u, sc.dt);
    }
  } catch (const Error& e) {
    res.trace.error = e.what();
  }
  res.metrics = compute_metrics(sc, res.trace);
  return res;
}

ComparisonTable tabulate(const std::vector<Scenario>& scenarios,
                         const std::vector<RunResult>& results) {
  ComparisonTable table;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    ComparisonRow row;
    row.label = scenarios[i].name;
    row.filter = scenarios[i].filter.kind;
    row.alpha_gain = scenarios[i].filter.alpha.gain;
    row.alpha_e = scenarios[i].filter.alpha_e;
    row.metrics = results[i].metrics;
    row.error = results[i].trace.error;
    table.rows.push_back(std::move(row));
  }
  return table;
}

ComparisonTable compare(const std::vector<Scenario>& scenarios, const RunOptions& options) {
  if (scenarios.size() < 2) throw ComparisonError("compare needs at least two scenarios");
  const auto& first = scenarios.front();
  for (const Scenario& s : scenarios) {
    if (s.model_id != first.model_id || s.model_params != first.model_params ||
        describe(s.barrier) != describe(first.barrier))
      throw ComparisonError("scenario '" + s.name + "' differs in model or barrier from '" +
                            first.name + "'");
  }
  return tabulate(scenarios, run_batch(scenarios, options));
}

std::vector<RunResult> run_batch(const std::vector<Scenario>& scenarios, const RunOptions& options) {
  std::vector<std::future<RunResult>> jobs;
  for (const Scenario& s : scenarios)
    jobs.push_back(std::async(std::launch::async, [&s, &options] { return run(s, options); }));
  std::vector<RunResult> results;
  for (auto& j : jobs) results.push_back(j.get());
  return results;
}

}  // namespace cbf
