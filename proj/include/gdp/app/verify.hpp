#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gdp/app/run_config.hpp"

namespace gdp::app {

struct CheckResult {
  std::string suite;
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Suite names in execution order.
const std::vector<std::string>& verify_suites();

/// Runs the named suites. `fault` = "adjoint" swaps in a deliberately wrong
/// adjoint so the adjoint suite must fail.
std::vector<CheckResult> run_verify(const std::vector<std::string>& suites, const std::string& fault = {});

/// Prints one line per check; returns 0 only if every check passed.
int cmd_verify(const RunConfig& cfg, std::ostream& out);

}  // namespace gdp::app
