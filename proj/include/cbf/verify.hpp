#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbf/filter.hpp"

namespace cbf {

/// Outcome of one named property check.
struct PropertyResult {
  std::string suite;
  std::string name;
  bool passed = true;
  std::size_t checked = 0;
  std::size_t failures = 0;
  /// Largest residual seen (meaning depends on the property).
  double worst = 0.0;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  /// Instances per oracle property.
  std::size_t instances = 10000;
  FaultInjection fault{};
};

/// Suites: "models", "filters", "bounds", "all". Unknown names raise
/// ParameterError.
std::vector<PropertyResult> run_suite(const std::string& suite, const VerifyOptions& options = {});
const std::vector<std::string>& suite_names();

std::string format_results(const std::vector<PropertyResult>& results);
bool all_passed(const std::vector<PropertyResult>& results);

}  // namespace cbf
