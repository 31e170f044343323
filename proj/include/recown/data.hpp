#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recown {

struct TimeSeries {
  std::vector<double> values;
  std::string sample_period;
  std::string name;

  void validate() const;  // nonempty, finite
};

// z-score statistics; fit only on training data.
struct NormStats {
  double mean = 0.0;
  double std = 1.0;

  static NormStats fit(std::span<const double> values);
  double apply(double x) const noexcept { return (x - mean) / std; }
  double invert(double z) const noexcept { return z * std + mean; }
  std::vector<double> apply(std::span<const double> xs) const;
};

struct WindowPair {
  std::size_t id = 0;
  std::vector<double> context;
  std::vector<double> target;
  bool flagged = false;  // synthetic anomaly injected
};

struct Dataset {
  std::vector<WindowPair> train;
  std::vector<WindowPair> validation;
  std::vector<WindowPair> test;
  NormStats norm;
  std::string source;
};

// Consecutive (context, target) slices starting every `stride` samples.
std::vector<WindowPair> extract_windows(std::span<const double> series, std::size_t context_len,
                                        std::size_t forecast_len, std::size_t stride,
                                        std::size_t first_id = 0);

// One parsed CSV record with access by column name.
class CsvRow {
 public:
  CsvRow(const std::vector<std::string>& header, const std::vector<std::string>& fields)
      : header_(header), fields_(fields) {}
  std::string_view field(std::string_view column) const;

 private:
  const std::vector<std::string>& header_;
  const std::vector<std::string>& fields_;
};

using RowFilter = std::function<bool(const CsvRow&)>;

// Predicate from "column!=value" or "column==value".
RowFilter parse_row_filter(const std::string& expression);

// Reads one numeric column; comma separated, one header row. Rows rejected by
// the filter are skipped.
TimeSeries read_csv_column(const std::filesystem::path& path, const std::string& column,
                           const RowFilter& filter = {});

struct CsvConfig {
  std::string column;
  std::size_t context_len = 96;
  std::size_t forecast_len = 32;
  std::size_t stride = 32;
  double train_fraction = 0.7;
  double validation_fraction = 0.1;
  RowFilter row_filter;
};

// Chronological split by rows, z-score stats fit on the training rows, then
// window extraction within each split.
Dataset load_csv(const std::filesystem::path& path, const CsvConfig& config);

enum class SynthKind { multi_sine, regime_switch, trend_season, white_noise };

SynthKind parse_synth_kind(std::string_view name);
std::string_view synth_kind_name(SynthKind kind);

struct SynthSizes {
  std::size_t train = 1000;
  std::size_t validation = 200;
  std::size_t test = 500;
  std::size_t context_len = 96;
  std::size_t forecast_len = 32;
  // Share of test sequences receiving a regime switch (regime_switch only).
  double anomaly_fraction = 0.3;
  double noise = 0.1;
};

// Deterministic generator of independent sequences. Test sequences of the
// regime_switch kind switch regime shortly before the end of the context in
// exactly round(anomaly_fraction * test) sequences, which are flagged.
Dataset synth_dataset(SynthKind kind, std::uint64_t seed, const SynthSizes& sizes);

// Re-expresses every window under other statistics (e.g. a model's).
void renormalize(Dataset& data, const NormStats& to);

}  // namespace recown
