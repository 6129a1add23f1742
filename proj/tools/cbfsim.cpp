// cbfsim: run scenarios, sweeps and verification suites from the command line.
//
// Exit codes: 0 safe / all passed, 2 safety violation, 1 error.

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cbf/config.hpp"
#include "cbf/errors.hpp"
#include "cbf/sim.hpp"
#include "cbf/verify.hpp"

namespace {

struct Common {
  std::string file;
  std::vector<std::string> sets;
  std::string out;
  std::string bound_cache;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> horizon;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("file", c.file, "Scenario file")->required();
  cmd->add_option("--set", c.sets, "Override, section.key=value (repeatable)");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--bound-cache", c.bound_cache, "Sidecar file for bound estimates");
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--dt", c.dt, "Integration step [s]");
  cmd->add_option("--horizon", c.horizon, "Simulated time [s]");
}

std::string exact(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> overrides(const Common& c) {
  std::vector<std::string> o = c.sets;
  if (c.seed) o.push_back("sim.seed=" + std::to_string(*c.seed));
  if (c.dt) o.push_back("sim.dt=" + exact(*c.dt));
  if (c.horizon) o.push_back("sim.horizon=" + exact(*c.horizon));
  return o;
}

std::string output_dir(const Common& c, const cbf::ScenarioFile& f) {
  if (!c.out.empty()) return c.out;
  if (auto env = cbf::output_dir_from_env()) return *env;
  if (!f.output_dir.empty()) return f.output_dir;
  return "out";
}

std::string stem(const std::string& name) {
  std::string s = name;
  for (char& ch : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ||
                    ch == '.' || ch == '=';
    if (!ok) ch = '_';
  }
  return s;
}

int exit_code(const std::vector<cbf::RunResult>& results) {
  bool error = false;
  for (const auto& r : results) {
    if (r.metrics.violation_steps > 0) return 2;
    error = error || !r.metrics.completed;
  }
  return error ? 1 : 0;
}

cbf::RunOptions run_options(const Common& c) {
  cbf::RunOptions o;
  o.bound_cache = c.bound_cache;
  return o;
}

int cmd_run(const Common& c) {
  const cbf::ScenarioFile f = cbf::load_scenario_file(c.file, overrides(c));
  const cbf::RunResult r = cbf::run(f.scenario, run_options(c));
  const std::string dir = output_dir(c, f);
  cbf::write_run_outputs(dir, stem(f.scenario.name), r);
  std::cout << "scenario " << f.scenario.name << " (" << r.trace.meta.scenario_hash << ")\n"
            << cbf::metrics_text(r.metrics);
  if (r.trace.meta.initial_outside_safe_set)
    std::cout << "warning: initial state outside the certified safe set\n";
  if (r.trace.error) std::cerr << "run aborted: " << *r.trace.error << '\n';
  std::cout << "outputs in " << dir << '\n';
  return exit_code({r});
}

int cmd_sweep(const Common& c, const std::string& param, const std::vector<std::string>& values) {
  cbf::ScenarioFile f = cbf::load_scenario_file(c.file, overrides(c));
  cbf::SweepSpec sweep = f.sweep.value_or(cbf::SweepSpec{});
  if (!param.empty()) sweep.param = param;
  if (!values.empty() || !param.empty()) sweep.values = values;
  const std::vector<cbf::Scenario> scenarios = cbf::expand_sweep(f.settings, sweep);
  const std::vector<cbf::RunResult> results = cbf::run_batch(scenarios, run_options(c));

  const std::string dir = output_dir(c, f);
  for (std::size_t i = 0; i < scenarios.size(); ++i)
    cbf::write_run_outputs(dir, stem(scenarios[i].name), results[i]);
  const std::string table = cbf::format_table(cbf::tabulate(scenarios, results));
  cbf::write_file_atomic((std::filesystem::path(dir) / (stem(f.scenario.name) + ".sweep.txt")).string(),
                         table);
  std::cout << table << "outputs in " << dir << '\n';
  return exit_code(results);
}

int cmd_verify(const std::string& suite, const cbf::VerifyOptions& options) {
  const auto results = cbf::run_suite(suite, options);
  std::cout << cbf::format_results(results);
  return cbf::all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety-filter simulator for robot control barrier functions"};
  app.require_subcommand(1);

  Common run_args, sweep_args;
  CLI::App* run = app.add_subcommand("run", "Run one scenario");
  add_common(run, run_args);

  CLI::App* sweep = app.add_subcommand("sweep", "Run a scenario for each value of one parameter");
  add_common(sweep, sweep_args);
  std::string param;
  std::vector<std::string> values;
  sweep->add_option("--param", param, "Parameter to sweep, section.key");
  sweep->add_option("--values", values, "Comma-separated values")->delimiter(',');

  CLI::App* verify = app.add_subcommand("verify", "Run verification suites");
  std::string suite;
  cbf::VerifyOptions vopt;
  bool flip = false;
  verify->add_option("suite", suite, "models | filters | bounds | all")->required();
  verify->add_option("--seed", vopt.seed, "Random seed");
  verify->add_option("--instances", vopt.instances, "Instances per oracle property");
  verify->add_flag("--fault-flip-psi", flip, "Flip the sign of Psi (mutation smoke test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, param, values);
    if (verify->parsed()) {
      vopt.fault.flip_psi_sign = flip;
      return cmd_verify(suite, vopt);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
