#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbf/sim.hpp"

namespace cbf {

/// One `key = value` entry of a scenario file and the line it came from
/// (0 for overrides and generated settings).
struct Setting {
  std::string value;
  int line = 0;
};

/// Settings keyed by "section.key"; top-level keys have no section prefix.
using Settings = std::map<std::string, Setting>;

struct SweepSpec {
  std::string param;
  std::vector<std::string> values;
};

struct ScenarioFile {
  Scenario scenario;
  Settings settings;
  std::optional<SweepSpec> sweep;
  /// [output] dir, possibly empty.
  std::string output_dir;
};

/// Syntax pass: sections, `key = value`, comments after '#'. Rejects
/// unknown sections and keys and duplicates, with the line number.
Settings parse_settings(const std::string& text);

/// Semantic pass; errors name the offending key and line.
Scenario build_scenario(const Settings& settings);

/// Canonical settings for a scenario (only keys relevant to its kinds).
Settings scenario_settings(const Scenario& scenario);
std::string serialize_settings(const Settings& settings);
std::string serialize_scenario(const Scenario& scenario);
Scenario parse_scenario(const std::string& text);

/// FNV-1a (64-bit) of the canonical serialization, as 16 hex digits.
std::string scenario_hash(const Scenario& scenario);

/// Applies "section.key=value"; unknown keys raise ConfigError.
void apply_override(Settings& settings, const std::string& assignment);

ScenarioFile load_scenario_file(const std::string& path,
                                const std::vector<std::string>& overrides = {});

/// One scenario per value, named "<name>[param=value]".
std::vector<Scenario> expand_sweep(const Settings& base, const SweepSpec& sweep);

/// Number with optional pi forms: "1.5", "-pi", "5*pi/6", "pi/4".
double parse_number(const std::string& text);

/// CBFSIM_OUT_DIR, if set and non-empty.
std::optional<std::string> output_dir_from_env();

}  // namespace cbf
