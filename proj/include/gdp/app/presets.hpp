#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "gdp/losses.hpp"

namespace gdp::app {

struct TaskPreset {
  std::string name;
  std::string degradation;  // stage list understood by parse_degradation
  double scale = 0.0;
  int inner_steps = 1;
  LossWeights weights;
  bool blind = false;
  int observations = 1;
  double drop_fraction = 0.25;
  int ddim_steps = 0;
};

using PresetTable = std::map<std::string, TaskPreset>;

/// Parses "<task>.<field>=<value>" lines.
PresetTable parse_presets(const std::string& text);

/// The table compiled into the binary.
const PresetTable& builtin_presets();

const TaskPreset& find_preset(const PresetTable& table, const std::string& task);

/// Applies "w_mse", "w_exposure", "w_color", "w_illum" and "exposure_target".
void apply_weight_overrides(LossWeights& w, const std::map<std::string, double>& overrides);

/// Reads a key=value weights file (same keys as above).
std::map<std::string, double> load_weights_file(const std::filesystem::path& path);

/// One line per preset, for --help.
std::string describe_presets(const PresetTable& table);

}  // namespace gdp::app
