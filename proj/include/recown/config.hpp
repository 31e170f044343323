#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "recown/data.hpp"
#include "recown/model.hpp"
#include "recown/training.hpp"

namespace recown {

// Everything a command needs. Built from defaults, then a preset, then a
// key = value file, then command-line overrides, and validated before use.
struct RunConfig {
  std::string command;
  // "synth:<kind>" or "csv:<path>"
  std::string dataset = "synth:regime-switch";
  SynthSizes synth;
  CsvConfig csv;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t seed = 7;
  std::filesystem::path out = "recown-out";
  std::filesystem::path checkpoint;  // empty: <out>/model.ckpt
  std::size_t horizon = 0;           // 0: trained forecast length
  std::vector<double> quantiles{0.05, 0.10};
  double worst_fraction = 0.05;
  double band_scale = 1.0;
  std::size_t smooth = 12;
  std::size_t forecast_count = 1;
  BlockConditioning conditioning = BlockConditioning::fixed;

  void validate() const;
  bool synthetic() const;
  std::filesystem::path dataset_path() const;
  SynthKind synth_kind() const;
  std::filesystem::path checkpoint_path() const;
  // Pushes the shared seed and window lengths into sub-configurations.
  void propagate();
};

std::vector<std::string> preset_names();
void apply_preset(RunConfig& config, const std::string& name);

// Sets one documented key; unknown keys and unparsable values throw ConfigError.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

// Lines of "key = value"; '#' starts a comment. A "preset" key is applied
// before all other keys of the file, unless presets are being skipped.
void apply_config_text(RunConfig& config, std::istream& in, const std::string& origin, bool apply_presets = true);
void apply_config_file(RunConfig& config, const std::filesystem::path& path, bool apply_presets = true);

// Loads the dataset named by the configuration.
Dataset load_dataset(const RunConfig& config);

}  // namespace recown
