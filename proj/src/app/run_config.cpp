#include "gdp/app/run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gdp::app {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

namespace {

void apply_one(RunConfig& cfg, const std::string& key, const std::string& v) {
  if (key == "task") cfg.task = v;
  else if (key == "variant") cfg.variant = v;
  else if (key == "scale") cfg.scale = std::stod(v);
  else if (key == "inner-steps") cfg.inner_steps = std::stoi(v);
  else if (key == "T") cfg.T = std::stoi(v);
  else if (key == "ddim-steps") cfg.ddim_steps = std::stoi(v);
  else if (key == "eta") cfg.eta = std::stod(v);
  else if (key == "seed") cfg.seed = std::stoull(v);
  else if (key == "patch") cfg.patch = std::stoi(v);
  else if (key == "stride") cfg.stride = std::stoi(v);
  else if (key == "base-size") cfg.base_size = std::stoi(v);
  else if (key == "weights-file") cfg.weights_file = v;
  else if (key == "input") cfg.inputs = split_list(v);
  else if (key == "output") cfg.output = v;
  else if (key == "trace") cfg.trace = v;
  else if (key == "report-json") cfg.report_json = v;
  else if (key == "prior") cfg.prior = v;
  else if (key == "mask") cfg.mask = v;
  else if (key == "gt") cfg.ground_truth = v;
  else if (key == "degradation") cfg.degradation = v;
  else if (key == "drop-fraction") cfg.drop_fraction = std::stod(v);
  else if (key == "light-f") cfg.light_factor = std::stod(v);
  else if (key == "light-bias") cfg.light_bias = std::stod(v);
  else if (key == "seeds") cfg.seeds = std::stoi(v);
  else if (key == "only") cfg.only = v;
  else if (key == "inject-fault") cfg.inject_fault = v;
  else if (key.rfind("w_", 0) == 0 || key == "exposure_target") cfg.weight_overrides[key] = std::stod(v);
  else throw std::domain_error("unknown config key '" + key + "'");
}

}  // namespace

void apply_values(RunConfig& cfg, const KeyValues& values) {
  for (const auto& [key, v] : values) {
    try {
      apply_one(cfg, key, v);
    } catch (const std::domain_error& e) {
      throw std::invalid_argument(e.what());
    } catch (const std::logic_error&) {
      // std::stod and friends throw invalid_argument / out_of_range
      throw std::invalid_argument("bad value '" + v + "' for " + key);
    }
  }
}

RunConfig build_config(const std::string& config_path, const KeyValues& flags,
                       const std::vector<std::string>& inputs) {
  RunConfig cfg;
  if (!config_path.empty()) apply_values(cfg, load_key_values(config_path));
  apply_values(cfg, flags);
  if (!inputs.empty()) cfg.inputs = inputs;
  return cfg;
}

}  // namespace gdp::app
