#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gdp::app {

/// Everything a subcommand needs. Populated from defaults, then a key=value
/// file, then command-line flags (later sources win).
struct RunConfig {
  std::string task;
  std::string variant = "x0";
  std::optional<double> scale;
  std::optional<int> inner_steps;
  int T = 1000;
  int ddim_steps = 0;  // 0 selects DDPM
  double eta = 0.0;
  std::uint64_t seed = 0;
  int patch = 0;
  int stride = 0;
  int base_size = 0;  // > 0 enables hierarchical restoration for blind tasks
  std::string weights_file;
  std::vector<std::string> inputs;
  std::string output;
  std::string trace;
  std::string report_json;
  std::string prior;         // directory of prior images
  std::string mask;          // inpainting mask (GDPF or PNG)
  std::string ground_truth;  // reference image for metrics
  std::string degradation;   // explicit stage list, overrides the preset
  std::optional<double> drop_fraction;
  double light_factor = 0.3;
  double light_bias = 0.05;
  int seeds = 10;            // chains per variant for ablate
  std::string only;          // verify: comma-separated suite names
  std::string inject_fault;  // verify: negative control
  std::map<std::string, double> weight_overrides;
};

using KeyValues = std::map<std::string, std::string>;

/// Parses "key=value" lines; '#' starts a comment, blank lines are skipped.
KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::filesystem::path& path);

/// Applies recognized keys (flag names without leading dashes). Unknown
/// keys throw std::invalid_argument. "input" may hold a comma-separated list.
void apply_values(RunConfig& cfg, const KeyValues& values);

/// Defaults, then the config file (if any), then explicitly given flags.
/// Non-empty `inputs` replace any "input" from the file.
RunConfig build_config(const std::string& config_path, const KeyValues& flags,
                       const std::vector<std::string>& inputs);

}  // namespace gdp::app
