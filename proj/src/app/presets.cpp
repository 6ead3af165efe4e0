#include "gdp/app/presets.hpp"

#include <sstream>
#include <stdexcept>

#include "gdp/app/presets_data.hpp"
#include "gdp/app/run_config.hpp"

namespace gdp::app {

namespace {

void set_field(TaskPreset& p, const std::string& field, const std::string& v) {
  if (field == "degradation") p.degradation = v;
  else if (field == "scale") p.scale = std::stod(v);
  else if (field == "inner_steps") p.inner_steps = std::stoi(v);
  else if (field == "blind") p.blind = std::stoi(v) != 0;
  else if (field == "observations") p.observations = std::stoi(v);
  else if (field == "drop_fraction") p.drop_fraction = std::stod(v);
  else if (field == "ddim_steps") p.ddim_steps = std::stoi(v);
  else apply_weight_overrides(p.weights, {{field, std::stod(v)}});
}

}  // namespace

PresetTable parse_presets(const std::string& text) {
  PresetTable table;
  for (const auto& [key, value] : parse_key_values(text)) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw std::invalid_argument("preset key '" + key + "' lacks a task");
    const std::string task = key.substr(0, dot);
    TaskPreset& p = table[task];
    p.name = task;
    set_field(p, key.substr(dot + 1), value);
  }
  return table;
}

const PresetTable& builtin_presets() {
  static const PresetTable table = parse_presets(kPresetsText);
  return table;
}

const TaskPreset& find_preset(const PresetTable& table, const std::string& task) {
  const auto it = table.find(task);
  if (it == table.end()) {
    std::string known;
    for (const auto& [name, _] : table) known += (known.empty() ? "" : ", ") + name;
    throw std::invalid_argument("unknown task '" + task + "' (known: " + known + ")");
  }
  return it->second;
}

void apply_weight_overrides(LossWeights& w, const std::map<std::string, double>& overrides) {
  for (const auto& [key, v] : overrides) {
    if (key == "w_mse") w.mse = v;
    else if (key == "w_exposure") w.exposure = v;
    else if (key == "w_color") w.color = v;
    else if (key == "w_illum") w.illumination = v;
    else if (key == "exposure_target") w.exposure_target = v;
    else throw std::invalid_argument("unknown weight '" + key + "'");
  }
}

std::map<std::string, double> load_weights_file(const std::filesystem::path& path) {
  std::map<std::string, double> out;
  for (const auto& [key, value] : load_key_values(path)) out[key] = std::stod(value);
  LossWeights probe;
  apply_weight_overrides(probe, out);  // rejects unknown keys early
  return out;
}

std::string describe_presets(const PresetTable& table) {
  std::ostringstream os;
  for (const auto& [name, p] : table) {
    os << "  " << name << ": scale=" << p.scale << " inner_steps=" << p.inner_steps;
    if (!p.degradation.empty()) os << " degradation=" << p.degradation;
    os << " w_mse=" << p.weights.mse;
    if (p.weights.exposure != 0) os << " w_exposure=" << p.weights.exposure;
    if (p.weights.color != 0) os << " w_color=" << p.weights.color;
    if (p.weights.illumination != 0) os << " w_illum=" << p.weights.illumination;
    if (p.blind) os << " blind";
    if (p.observations > 1) os << " observations=" << p.observations;
    if (p.ddim_steps > 0) os << " ddim_steps=" << p.ddim_steps;
    os << '\n';
  }
  return os.str();
}

}  // namespace gdp::app
