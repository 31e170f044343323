#include "recown/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "recown/error.hpp"

namespace recown {

namespace {

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == delimiter) {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

void TimeSeries::validate() const {
  if (values.empty()) throw InputError("time series '" + name + "' is empty");
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("time series '" + name + "' has non-finite values");
  }
}

NormStats NormStats::fit(std::span<const double> values) {
  if (values.empty()) throw InputError("cannot fit normalization on no data");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    throw InputError("constant series cannot be z-score normalized");
  }
  return NormStats{mean, sd};
}

std::vector<double> NormStats::apply(std::span<const double> xs) const {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = apply(xs[i]);
  return out;
}

std::vector<WindowPair> extract_windows(std::span<const double> series, std::size_t context_len,
                                        std::size_t forecast_len, std::size_t stride,
                                        std::size_t first_id) {
  if (stride == 0) throw ContractError("window stride must be positive");
  std::vector<WindowPair> out;
  const std::size_t span_len = context_len + forecast_len;
  for (std::size_t start = 0; start + span_len <= series.size(); start += stride) {
    WindowPair p;
    p.id = first_id + out.size();
    p.context.assign(series.begin() + static_cast<std::ptrdiff_t>(start),
                     series.begin() + static_cast<std::ptrdiff_t>(start + context_len));
    p.target.assign(series.begin() + static_cast<std::ptrdiff_t>(start + context_len),
                    series.begin() + static_cast<std::ptrdiff_t>(start + span_len));
    out.push_back(std::move(p));
  }
  return out;
}

std::string_view CsvRow::field(std::string_view column) const {
  for (std::size_t i = 0; i < header_.size() && i < fields_.size(); ++i) {
    if (header_[i] == column) return fields_[i];
  }
  throw InputError("no column '" + std::string(column) + "' in CSV row");
}

RowFilter parse_row_filter(const std::string& expression) {
  for (const char* op : {"!=", "=="}) {
    const auto pos = expression.find(op);
    if (pos == std::string::npos) continue;
    const std::string column = expression.substr(0, pos);
    const std::string value = expression.substr(pos + 2);
    if (column.empty()) break;
    const bool keep_equal = std::string_view(op) == "==";
    return [column, value, keep_equal](const CsvRow& row) {
      return (row.field(column) == value) == keep_equal;
    };
  }
  throw ConfigError("row filter must look like 'column!=value' or 'column==value': " + expression);
}

TimeSeries read_csv_column(const std::filesystem::path& path, const std::string& column,
                           const RowFilter& filter) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("CSV file has no header", 1);
  const std::vector<std::string> header = split_fields(line, ',');
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw InputError("CSV has no column named '" + column + "'");
  const std::size_t col = static_cast<std::size_t>(it - header.begin());

  TimeSeries series;
  series.name = column;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_fields(line, ',');
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    if (filter && !filter(CsvRow(header, fields))) continue;
    double v = 0.0;
    if (!parse_double(fields[col], v)) {
      throw ParseError("non-numeric value '" + fields[col] + "' in column '" + column + "'", line_no);
    }
    series.values.push_back(v);
  }
  series.validate();
  return series;
}

Dataset load_csv(const std::filesystem::path& path, const CsvConfig& config) {
  if (config.train_fraction <= 0.0 || config.validation_fraction < 0.0 ||
      config.train_fraction + config.validation_fraction > 1.0 + 1e-12) {
    throw ConfigError("split fractions must satisfy 0 < train, 0 <= validation, train + validation <= 1");
  }
  TimeSeries series = read_csv_column(path, config.column, config.row_filter);
  const std::size_t n = series.values.size();
  const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(
                                               config.validation_fraction * static_cast<double>(n))));
  const std::span<const double> all(series.values);
  Dataset ds;
  ds.source = path.string();
  ds.norm = NormStats::fit(all.subspan(0, n_train));
  const std::vector<double> z = ds.norm.apply(all);
  const std::span<const double> zs(z);
  ds.train = extract_windows(zs.subspan(0, n_train), config.context_len, config.forecast_len, config.stride);
  ds.validation = extract_windows(zs.subspan(n_train, n_val), config.context_len, config.forecast_len,
                                  config.stride, ds.train.size());
  ds.test = extract_windows(zs.subspan(n_train + n_val), config.context_len, config.forecast_len,
                            config.stride, ds.train.size() + ds.validation.size());
  if (ds.train.empty()) {
    throw InputError("not enough rows for a single (context, target) pair in the training split");
  }
  return ds;
}

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "multi-sine") return SynthKind::multi_sine;
  if (name == "regime-switch") return SynthKind::regime_switch;
  if (name == "trend+season" || name == "trend-season") return SynthKind::trend_season;
  if (name == "white-noise") return SynthKind::white_noise;
  throw ConfigError("unknown synthetic dataset kind '" + std::string(name) + "'");
}

std::string_view synth_kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::multi_sine: return "multi-sine";
    case SynthKind::regime_switch: return "regime-switch";
    case SynthKind::trend_season: return "trend+season";
    case SynthKind::white_noise: return "white-noise";
  }
  return "unknown";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Two drifting sinusoids (periods 16 and 8) plus Gaussian noise.
std::vector<double> multi_sine(std::size_t length, double noise, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double a1 = 0.6 + 0.8 * unit(rng);
  const double a2 = 0.2 + 0.6 * unit(rng);
  double p1 = kTwoPi * unit(rng);
  double p2 = kTwoPi * unit(rng);
  std::vector<double> x(length);
  for (std::size_t t = 0; t < length; ++t) {
    x[t] = a1 * std::sin(p1) + a2 * std::sin(p2) + noise * gauss(rng);
    p1 += kTwoPi / 16.0 + 0.01 * gauss(rng);
    p2 += kTwoPi / 8.0 + 0.01 * gauss(rng);
  }
  return x;
}

std::vector<double> trend_season(std::size_t length, double noise, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double slope = (unit(rng) - 0.5) * 0.02;
  const double level = (unit(rng) - 0.5) * 2.0;
  const double amp = 0.5 + unit(rng);
  const double phase = kTwoPi * unit(rng);
  double ar = 0.0;
  std::vector<double> x(length);
  for (std::size_t t = 0; t < length; ++t) {
    ar = 0.8 * ar + noise * gauss(rng);
    x[t] = level + slope * static_cast<double>(t) +
           amp * std::sin(kTwoPi * static_cast<double>(t) / 24.0 + phase) + ar;
  }
  return x;
}

// Past a switch point near the end of the context the series is amplified,
// shifted in level and sped up; severity is drawn per sequence.
void inject_regime_switch(std::vector<double>& x, std::size_t context_len, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double severity = 0.3 + 0.7 * unit(rng);
  const std::size_t earliest = context_len > 24 ? context_len - 24 : 0;
  const std::size_t start = earliest + static_cast<std::size_t>(unit(rng) * static_cast<double>(context_len - earliest - 4));
  const double gain = 1.0 + 1.5 * severity;
  const double shift = (unit(rng) < 0.5 ? -1.0 : 1.0) * 1.5 * severity;
  const double speed = 1.0 + 0.5 * severity;
  std::vector<double> base = x;
  for (std::size_t t = start; t < x.size(); ++t) {
    // resample the original course at a faster rate
    const double src = static_cast<double>(start) + speed * static_cast<double>(t - start);
    const auto i0 = std::min(static_cast<std::size_t>(src), base.size() - 1);
    const std::size_t i1 = std::min(i0 + 1, base.size() - 1);
    const double frac = std::min(src - static_cast<double>(i0), 1.0);
    const double v = base[i0] + frac * (base[i1] - base[i0]);
    x[t] = gain * v + shift;
  }
}

std::vector<WindowPair> generate(SynthKind kind, std::size_t count, const SynthSizes& sizes,
                                 std::mt19937_64& rng, std::size_t first_id) {
  const std::size_t length = sizes.context_len + sizes.forecast_len;
  std::vector<WindowPair> out(count);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> x;
    switch (kind) {
      case SynthKind::multi_sine:
      case SynthKind::regime_switch:
        // Regime switch extends the multi-sine base process; the extra
        // length keeps sped-up resampling inside the generated course.
        x = multi_sine(kind == SynthKind::regime_switch ? 2 * length : length, sizes.noise, rng);
        break;
      case SynthKind::trend_season: x = trend_season(length, sizes.noise, rng); break;
      case SynthKind::white_noise:
        x.resize(length);
        for (double& v : x) v = sizes.noise * gauss(rng);
        break;
    }
    WindowPair& p = out[i];
    p.id = first_id + i;
    p.context.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(sizes.context_len));
    p.target.assign(x.begin() + static_cast<std::ptrdiff_t>(sizes.context_len),
                    x.begin() + static_cast<std::ptrdiff_t>(length));
    if (kind == SynthKind::regime_switch) {
      // keep the base course for resampling beyond the target
      p.context.insert(p.context.end(), x.begin() + static_cast<std::ptrdiff_t>(sizes.context_len),
                       x.end());
    }
  }
  return out;
}

}  // namespace

Dataset synth_dataset(SynthKind kind, std::uint64_t seed, const SynthSizes& sizes) {
  if (sizes.train == 0) throw InputError("synthetic dataset needs training sequences");
  if (sizes.context_len == 0 || sizes.forecast_len == 0) throw ContractError("empty synthetic windows");
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.source = "synth:" + std::string(synth_kind_name(kind));
  ds.train = generate(kind, sizes.train, sizes, rng, 0);
  ds.validation = generate(kind, sizes.validation, sizes, rng, sizes.train);
  ds.test = generate(kind, sizes.test, sizes, rng, sizes.train + sizes.validation);

  if (kind == SynthKind::regime_switch) {
    auto trim = [&](WindowPair& p) { p.context.resize(sizes.context_len); };
    // full course of each test sequence before trimming
    const auto flagged = static_cast<std::size_t>(std::llround(sizes.anomaly_fraction * static_cast<double>(ds.test.size())));
    std::vector<std::size_t> order(ds.test.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t j = 0; j < flagged; ++j) {
      WindowPair& p = ds.test[order[j]];
      std::vector<double> course = p.context;
      inject_regime_switch(course, sizes.context_len, rng);
      p.context.assign(course.begin(), course.begin() + static_cast<std::ptrdiff_t>(sizes.context_len));
      p.target.assign(course.begin() + static_cast<std::ptrdiff_t>(sizes.context_len),
                      course.begin() + static_cast<std::ptrdiff_t>(sizes.context_len + sizes.forecast_len));
      p.flagged = true;
    }
    for (auto* split : {&ds.train, &ds.validation, &ds.test}) {
      for (WindowPair& p : *split) trim(p);
    }
  }

  std::vector<double> train_values;
  for (const WindowPair& p : ds.train) {
    train_values.insert(train_values.end(), p.context.begin(), p.context.end());
    train_values.insert(train_values.end(), p.target.begin(), p.target.end());
  }
  ds.norm = NormStats::fit(train_values);
  for (auto* split : {&ds.train, &ds.validation, &ds.test}) {
    for (WindowPair& p : *split) {
      p.context = ds.norm.apply(p.context);
      p.target = ds.norm.apply(p.target);
    }
  }
  return ds;
}

void renormalize(Dataset& data, const NormStats& to) {
  const NormStats from = data.norm;
  auto map = [&](std::vector<double>& xs) {
    for (double& v : xs) v = to.apply(from.invert(v));
  };
  for (auto* split : {&data.train, &data.validation, &data.test}) {
    for (auto& p : *split) {
      map(p.context);
      map(p.target);
    }
  }
  data.norm = to;
}

}  // namespace recown
