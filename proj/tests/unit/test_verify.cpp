#include <doctest.h>

#include "cbf/errors.hpp"
#include "cbf/verify.hpp"

using namespace cbf;

TEST_CASE("every verification suite passes on a small sample") {
  for (const std::string& suite : {"models", "filters", "bounds"}) {
    const auto results = run_suite(suite, {3, 500, {}});
    INFO(format_results(results));
    CHECK_FALSE(results.empty());
    CHECK(all_passed(results));
    for (const auto& r : results) {
      CHECK(r.suite == suite);
      CHECK(r.checked > 0);
    }
  }
}

TEST_CASE("a flipped switching sign is caught by the filter suite") {
  const auto results = run_suite("filters", {3, 500, FaultInjection{true}});
  CHECK_FALSE(all_passed(results));
  std::size_t failing = 0;
  for (const auto& r : results)
    if (!r.passed) ++failing;
  CHECK(failing >= 5);
  CHECK(format_results(results).find("FAIL [filters]") != std::string::npos);
}

TEST_CASE("suite names") {
  const auto& names = suite_names();
  CHECK(std::find(names.begin(), names.end(), "all") != names.end());
  CHECK_THROWS_AS(run_suite("everything"), ParameterError);
}
