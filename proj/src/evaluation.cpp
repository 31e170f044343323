#include "recown/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "recown/error.hpp"

namespace recown {

namespace {

template <class Get>
std::pair<double, double> value_range(std::span<const ForecastRecord> records, Get get, const char* what) {
  if (records.size() < 2) throw ContractError(std::string("need at least two records to score ") + what);
  double lo = get(records[0]), hi = lo;
  for (const auto& r : records) {
    const double v = get(r);
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite ") + what + " in records");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) throw DomainError(std::string("degenerate ") + what + " range: all values identical");
  return {lo, hi};
}

}  // namespace

std::vector<double> prediction_score(std::span<const ForecastRecord> records) {
  const auto [lo, hi] = value_range(records, [](const ForecastRecord& r) { return r.se; }, "SE");
  std::vector<double> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out[i] = std::sqrt(std::clamp((records[i].se - lo) / (hi - lo), 0.0, 1.0));
  }
  return out;
}

std::vector<double> likelihood_score(std::span<const ForecastRecord> records) {
  const auto [lo, hi] = value_range(records, [](const ForecastRecord& r) { return r.cwll; }, "likelihood");
  std::vector<double> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out[i] = std::sqrt(std::clamp((records[i].cwll - hi) / (lo - hi), 0.0, 1.0));
  }
  return out;
}

double mean_ce(std::span<const double> s_pred, std::span<const double> s_ll) {
  if (s_pred.size() != s_ll.size() || s_pred.empty()) throw DimensionError("score vectors differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < s_pred.size(); ++i) {
    const double d = s_pred[i] - s_ll[i];
    total += d * d;
  }
  return total / static_cast<double>(s_pred.size());
}

double correlation_error(std::span<ForecastRecord> records) {
  const std::vector<double> sp = prediction_score(records);
  const std::vector<double> sl = likelihood_score(records);
  double total = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].s_pred = sp[i];
    records[i].s_ll = sl[i];
    records[i].ce = (sp[i] - sl[i]) * (sp[i] - sl[i]);
    total += records[i].ce;
  }
  return total / static_cast<double>(records.size());
}

double random_baseline(std::span<const ForecastRecord> records, std::uint64_t seed) {
  const std::vector<double> sp = prediction_score(records);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> su(sp.size());
  for (double& u : su) u = unit(rng);
  return mean_ce(sp, su);
}

double random_baseline_expectation(std::span<const double> s_pred) {
  if (s_pred.empty()) throw ContractError("no scores");
  double total = 0.0;
  for (double s : s_pred) total += s * s - s + 1.0 / 3.0;
  return total / static_cast<double>(s_pred.size());
}

RiskSelection risk_selection(std::span<const ForecastRecord> records, double quantile,
                             double worst_fraction) {
  if (!(quantile > 0.0 && quantile <= 1.0)) throw ContractError("risk quantile must lie in (0, 1]");
  if (!(worst_fraction > 0.0 && worst_fraction <= 1.0)) throw ContractError("worst fraction must lie in (0, 1]");
  if (records.empty()) throw ContractError("no records");
  const std::size_t n = records.size();
  auto count = [n](double f) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9)), 1, n);
  };
  std::vector<std::size_t> by_ll(n), by_se(n);
  std::iota(by_ll.begin(), by_ll.end(), 0);
  std::iota(by_se.begin(), by_se.end(), 0);
  std::stable_sort(by_ll.begin(), by_ll.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].cwll < records[b].cwll; });
  std::stable_sort(by_se.begin(), by_se.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].se > records[b].se; });
  RiskSelection out;
  out.quantile = quantile;
  out.selected = count(quantile);
  out.worst = count(worst_fraction);
  std::vector<char> chosen(n, 0);
  for (std::size_t i = 0; i < out.selected; ++i) chosen[by_ll[i]] = 1;
  for (std::size_t i = 0; i < out.worst; ++i) out.captured += chosen[by_se[i]] ? 1 : 0;
  out.coverage = static_cast<double>(out.captured) / static_cast<double>(out.worst);
  out.expected_random = static_cast<double>(out.selected) / static_cast<double>(n);
  return out;
}

std::vector<double> moving_average(std::span<const double> xs, std::size_t width) {
  if (width == 0) throw ContractError("moving average width must be positive");
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= width) acc -= xs[i - width];
    out[i] = acc / static_cast<double>(std::min(i + 1, width));
  }
  return out;
}

void write_records(std::ostream& out, std::span<const ForecastRecord> records) {
  out << "id,se,cwll,s_pred,s_ll,ce\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.id << ',' << r.se << ',' << r.cwll << ',' << r.s_pred << ',' << r.s_ll << ',' << r.ce << '\n';
  }
}

std::vector<ForecastRecord> read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,se,cwll,s_pred,s_ll,ce", 0) != 0) {
    throw ParseError("records file lacks the expected header", 1);
  }
  std::vector<ForecastRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    ForecastRecord r;
    char c1, c2, c3, c4, c5;
    if (!(row >> r.id >> c1 >> r.se >> c2 >> r.cwll >> c3 >> r.s_pred >> c4 >> r.s_ll >> c5 >> r.ce)) {
      throw ParseError("malformed record", line_no);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace recown
