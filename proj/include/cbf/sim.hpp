#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbf/barrier.hpp"
#include "cbf/filter.hpp"
#include "cbf/models.hpp"
#include "cbf/types.hpp"

namespace cbf {

inline constexpr const char* kToolVersion = "cbfsim 1.0.0";

enum class FilterKind {
  none,
  velocity,
  torque,
  robust_torque,
  velocity_command,
  underactuated,
  robust_underactuated,
};

const char* to_string(FilterKind k);
FilterKind filter_kind_from_string(const std::string& s);

struct FilterSpec {
  FilterKind kind = FilterKind::none;
  ClassKappa alpha{};
  double alpha_e = 1.0;
  /// K_vel = k_vel * I (N m s/rad); also the tracking loop's D gain.
  double k_vel = 10.0;
  /// Robust bounds; a value <= 0 means "estimate from the box".
  double c_u = 0.0;
  double c_l = 0.0;
  /// robust_torque: c_u = c_u_factor * lambda_hat when c_u is estimated.
  double c_u_factor = 5.0;
  double bound_factor = 1.25;
  std::size_t bound_samples = 10000;
  GravityMode mode = GravityMode::keep_gravity;
  /// Low-level loop adds G(q) for the none and velocity filters.
  bool gravity_compensation = true;
  bool gravity_precompensation = false;
  /// Coordinates forming w(q) for the underactuated filters.
  std::vector<int> complement;
};

struct TaskSpec {
  enum class Kind { setpoint, line, circle, joint_setpoint, constant_input, sinusoid_input };
  Kind kind = Kind::joint_setpoint;
  Vec point;
  Vec velocity;
  double radius = 0.0;
  double omega = 0.0;
  double phase = 0.0;
  double lambda = 1.0;
  /// Tracking tasks: qd_des is scaled down to this norm (rad/s) when larger;
  /// 0 leaves it alone. Keeps the nominal torque bounded near task singularities.
  double max_speed = 0.0;
  /// Input u_des(t) = offset + amplitude sin(2 pi frequency t) on every
  /// channel, minus damping * B^T qd.
  double offset = 0.0;
  double amplitude = 0.0;
  double frequency = 0.0;
  double damping = 0.0;

  bool is_input() const { return kind == Kind::constant_input || kind == Kind::sinusoid_input; }
};

const char* to_string(TaskSpec::Kind k);
TaskSpec::Kind task_kind_from_string(const std::string& s);

struct InitialSpec {
  Vec q;
  Vec qdot;
  /// Draw (q, qd) from the certified safe set instead of using q, qdot.
  bool random = false;
  double velocity_scale = 0.0;
  double margin = 0.05;
  /// Range for random joint positions; the scenario box if empty.
  Vec q_lo;
  Vec q_hi;
};

struct Scenario {
  std::string name = "scenario";
  std::string model_id = "double_integrator";
  ParamMap model_params;
  BarrierDescriptor barrier = PositionBox{1.0, 0};
  FilterSpec filter;
  TaskSpec task;
  InitialSpec initial;
  /// Box for bound estimation and random initial states; model default if empty.
  std::optional<StateBox> box;
  double dt = 1e-3;
  double horizon = 10.0;
  std::uint64_t seed = 0;
  double tol = 1e-3;
};

/// Throws ParameterError if dt, horizon, tolerances or sizes are invalid.
void validate(const Scenario& s, const RobotModel& model);

struct Record {
  double t = 0.0;
  Vec q;
  Vec qdot;
  Vec command;
  Vec u;
  double h = 0.0;
  /// h_D, or hhat_D for the underactuated filters.
  double h_D = 0.0;
  double psi = 0.0;
  bool intervened = false;
  /// Barrier certified by the active filter (h for kinematic, h_D or hhat_D otherwise).
  double certified = 0.0;
};

struct TraceMeta {
  std::string scenario_hash;
  std::string tool_version = kToolVersion;
  bool initial_outside_safe_set = false;
  /// Robust-filter bounds actually used (0 when not applicable).
  double c_u = 0.0;
  double c_l = 0.0;
};

struct Trace {
  TraceMeta meta;
  std::vector<Record> records;
  /// Set when the run aborted; records hold the partial trace.
  std::optional<std::string> error;
};

struct Metrics {
  double min_h = 0.0;
  double min_h_D = 0.0;
  double min_certified = 0.0;
  std::size_t violation_steps = 0;
  double intervention_fraction = 0.0;
  double tracking_rms = 0.0;
  double max_command_norm = 0.0;
  std::size_t records = 0;
  bool completed = false;
};

struct RunResult {
  Trace trace;
  Metrics metrics;
};

struct RunOptions {
  /// Sidecar file for bound estimates; empty disables caching.
  std::string bound_cache;
  FaultInjection fault{};
};

/// Classical RK4 with the input held constant over the step.
State rk4_step(const RobotModel& model, const State& s, const Vec& u, double dt);

RunResult run(const Scenario& scenario, const RunOptions& options = {});

/// Independent runs executed in parallel; results keep the input order.
std::vector<RunResult> run_batch(const std::vector<Scenario>& scenarios,
                                 const RunOptions& options = {});

/// Recomputes the metrics from records (used for the recount invariant).
Metrics compute_metrics(const Scenario& scenario, const Trace& trace);

/// Initial state drawn from the certified safe set with margin
/// `scenario.initial.margin`, deterministic in `seed`. Robust filters also need
/// their tightened barrier above the margin.
State sample_initial_state(const Scenario& scenario, std::uint64_t seed);

struct ComparisonRow {
  std::string label;
  FilterKind filter = FilterKind::none;
  double alpha_gain = 0.0;
  double alpha_e = 0.0;
  Metrics metrics;
  std::optional<std::string> error;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
};

/// Runs every scenario (in parallel) and tabulates the metrics. Throws
/// ComparisonError unless there are >= 2 scenarios sharing model and barrier.
ComparisonTable compare(const std::vector<Scenario>& scenarios, const RunOptions& options = {});
ComparisonTable tabulate(const std::vector<Scenario>& scenarios, const std::vector<RunResult>& results);
std::string format_table(const ComparisonTable& table);

// Output files; each is written to a temporary name and renamed.
std::string trace_csv(const Trace& trace);
std::string metrics_text(const Metrics& m);
std::string metrics_json(const Metrics& m, const TraceMeta& meta);
void write_file_atomic(const std::string& path, const std::string& content);
void write_run_outputs(const std::string& dir, const std::string& stem, const RunResult& result);

}  // namespace cbf
