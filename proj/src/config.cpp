#include "recown/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "recown/error.hpp"

namespace recown {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("'" + key + "' expects a real number, got '" + v + "'");
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto size_key = [&t](const char* name, std::size_t RunConfig::*field) {
      t[name] = [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = to_size(k, v); };
    };
    t["dataset"] = [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = v; };
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); };
    t["out"] = [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; };
    t["checkpoint"] = [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = v; };
    size_key("horizon", &RunConfig::horizon);
    size_key("smooth", &RunConfig::smooth);
    size_key("forecast.count", &RunConfig::forecast_count);
    t["quantile"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.quantiles.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) c.quantiles.push_back(to_real(k, trim(item)));
    };
    t["forecast.conditioning"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "rolling") c.conditioning = BlockConditioning::rolling;
      else if (v == "fixed") c.conditioning = BlockConditioning::fixed;
      else throw ConfigError("'" + k + "' must be rolling or fixed");
    };
    t["worst_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.worst_fraction = to_real(k, v); };
    t["band_scale"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.band_scale = to_real(k, v); };

    t["synth.train"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.train = to_size(k, v); };
    t["synth.validation"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.validation = to_size(k, v); };
    t["synth.test"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.test = to_size(k, v); };
    t["synth.anomaly_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.anomaly_fraction = to_real(k, v); };
    t["synth.noise"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.noise = to_real(k, v); };

    t["csv.column"] = [](RunConfig& c, const std::string&, const std::string& v) { c.csv.column = v; };
    t["csv.stride"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.csv.stride = to_size(k, v); };
    t["csv.filter"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.csv.row_filter = v.empty() ? RowFilter{} : parse_row_filter(v);
    };
    t["csv.train_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.csv.train_fraction = to_real(k, v); };
    t["csv.validation_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.csv.validation_fraction = to_real(k, v); };

    t["window.length"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.srnn.window.length = to_size(k, v); };
    t["window.hop"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.srnn.window.hop = to_size(k, v); };
    t["window.sigma"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.srnn.window.sigma = to_real(k, v); };
    t["window.lowpass"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.srnn.window.lowpass_factor = to_size(k, v); };
    t["window.kind"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "gaussian") c.model.srnn.window.kind = WindowKind::gaussian;
      else if (v == "rectangular") c.model.srnn.window.kind = WindowKind::rectangular;
      else throw ConfigError("'" + k + "' must be gaussian or rectangular");
    };
    t["context_len"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.srnn.context_len = to_size(k, v); };
    t["forecast_len"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.srnn.forecast_len = to_size(k, v); };
    t["srnn.hidden"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.srnn.hidden = to_size(k, v); };
    t["circuit.depth"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.cwspn.structure.depth = to_size(k, v); };
    t["circuit.repetitions"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.cwspn.structure.repetitions = to_size(k, v); };
    t["circuit.sums"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.cwspn.structure.sums = to_size(k, v); };
    t["circuit.leaves"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.cwspn.structure.leaves = to_size(k, v); };
    t["conditioner.hidden"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.cwspn.hidden = to_size(k, v); };

    t["train.batch_size"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = to_size(k, v); };
    t["train.epochs"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_size(k, v); };
    t["train.lr_srnn"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr_srnn = to_real(k, v); };
    t["train.lr_cwspn"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr_cwspn = to_real(k, v); };
    t["train.beta1"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.beta1 = to_real(k, v); };
    t["train.beta2"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.beta2 = to_real(k, v); };
    t["train.eps"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.eps = to_real(k, v); };
    t["train.se_floor"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.se_floor = to_real(k, v); };
    t["train.clip_norm"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.clip_norm = to_real(k, v); };
    t["train.sigma_floor"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.sigma_floor = to_real(k, v); };
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  keys.push_back("preset");
  std::sort(keys.begin(), keys.end());
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  if (key == "preset") {
    apply_preset(config, value);
    return;
  }
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second(config, key, value);
}

std::vector<std::string> preset_names() { return {"small", "medium", "large"}; }

void apply_preset(RunConfig& c, const std::string& name) {
  // all presets share the desk-scale synthetic windowing
  c.model.srnn.window.length = 16;
  c.model.srnn.window.hop = 8;
  c.model.srnn.window.lowpass_factor = 2;
  c.model.srnn.context_len = 96;
  c.model.srnn.forecast_len = 32;
  if (name == "small") {
    c.model.srnn.hidden = 32;
    c.model.cwspn.structure = StructureParams{2, 4, 4, 4, 0};
    c.model.cwspn.hidden = 128;
    c.train.epochs = 30;
    c.synth.train = 1500;
    c.synth.validation = 200;
    c.synth.test = 600;
  } else if (name == "medium") {
    c.model.srnn.hidden = 64;
    c.model.cwspn.structure = StructureParams{2, 6, 6, 6, 0};
    c.model.cwspn.hidden = 128;
    c.train.epochs = 40;
    c.synth.train = 3000;
    c.synth.validation = 300;
    c.synth.test = 1000;
  } else if (name == "large") {
    c.model.srnn.hidden = 128;
    c.model.cwspn.structure = StructureParams{2, 8, 8, 8, 0};
    c.model.cwspn.hidden = 192;
    c.train.epochs = 60;
    c.synth.train = 6000;
    c.synth.validation = 500;
    c.synth.test = 1500;
  } else {
    throw ConfigError("unknown preset '" + name + "' (choose small, medium or large)");
  }
}

void apply_config_text(RunConfig& config, std::istream& in, const std::string& origin, bool apply_presets) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  for (const auto& [k, v] : entries) {
    if (k == "preset" && apply_presets) apply_preset(config, v);
  }
  for (const auto& [k, v] : entries) {
    if (k == "preset") continue;
    try {
      set_config_value(config, k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path, bool apply_presets) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  apply_config_text(config, in, path.string(), apply_presets);
}

bool RunConfig::synthetic() const { return dataset.rfind("synth:", 0) == 0; }

std::filesystem::path RunConfig::dataset_path() const {
  if (dataset.rfind("csv:", 0) != 0) throw ConfigError("dataset is not a CSV file: " + dataset);
  return dataset.substr(4);
}

SynthKind RunConfig::synth_kind() const { return parse_synth_kind(dataset.substr(6)); }

std::filesystem::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? out / "model.ckpt" : checkpoint;
}

void RunConfig::propagate() {
  model.seed = seed;
  train.seed = seed;
  synth.context_len = model.srnn.context_len;
  synth.forecast_len = model.srnn.forecast_len;
  csv.context_len = model.srnn.context_len;
  csv.forecast_len = model.srnn.forecast_len;
}

void RunConfig::validate() const {
  if (synthetic()) {
    synth_kind();
  } else if (dataset.rfind("csv:", 0) == 0) {
    const auto path = dataset_path();
    if (path.empty()) throw ConfigError("dataset 'csv:' needs a path");
    if (!std::filesystem::exists(path)) throw ConfigError("dataset file not found: " + path.string());
    if (csv.column.empty()) throw ConfigError("csv.column is required for CSV datasets");
    if (csv.stride == 0) throw ConfigError("csv.stride must be positive");
  } else {
    throw ConfigError("dataset must be 'synth:<kind>' or 'csv:<path>', got '" + dataset + "'");
  }
  if (synth.anomaly_fraction < 0.0 || synth.anomaly_fraction > 1.0) {
    throw ConfigError("synth.anomaly_fraction must lie in [0, 1]");
  }
  if (!(synth.noise >= 0.0)) throw ConfigError("synth.noise must be non-negative");
  try {
    model.validate();
    model.srnn.window.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  train.validate();
  if (horizon % model.srnn.window.hop != 0) {
    throw ConfigError("horizon " + std::to_string(horizon) + " is not a multiple of the hop " +
                      std::to_string(model.srnn.window.hop));
  }
  for (double q : quantiles) {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("quantiles must lie in (0, 1]");
  }
  if (!(worst_fraction > 0.0 && worst_fraction <= 1.0)) throw ConfigError("worst_fraction must lie in (0, 1]");
  if (smooth == 0) throw ConfigError("smooth must be positive");
  if (forecast_count == 0) throw ConfigError("forecast.count must be positive");
}

Dataset load_dataset(const RunConfig& config) {
  if (config.synthetic()) return synth_dataset(config.synth_kind(), config.seed, config.synth);
  return load_csv(config.dataset_path(), config.csv);
}

}  // namespace recown
