#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace recown {

struct ForecastRecord {
  std::size_t id = 0;
  double se = 0.0;    // mean squared error of the prediction
  double cwll = 0.0;  // likelihood of the prediction given its context
  double s_pred = 0.0;
  double s_ll = 0.0;
  double ce = 0.0;
  bool flagged = false;
};

// sqrt((SE - min) / (max - min)).
std::vector<double> prediction_score(std::span<const ForecastRecord> records);
// sqrt((l - max) / (min - max)); best likelihood scores 0.
std::vector<double> likelihood_score(std::span<const ForecastRecord> records);

// Fills s_pred, s_ll and ce of every record; returns the mean CE.
double correlation_error(std::span<ForecastRecord> records);

double mean_ce(std::span<const double> s_pred, std::span<const double> s_ll);

// Mean CE with S_l replaced by uniform draws.
double random_baseline(std::span<const ForecastRecord> records, std::uint64_t seed);
// Closed-form expectation of the random baseline: mean(S^2 - S + 1/3).
double random_baseline_expectation(std::span<const double> s_pred);

struct RiskSelection {
  double quantile = 0.0;
  std::size_t selected = 0;     // lowest-likelihood records taken
  std::size_t worst = 0;        // size of the worst-by-SE set
  std::size_t captured = 0;     // overlap
  double coverage = 0.0;        // captured / worst
  double expected_random = 0.0; // coverage of a random selection of the same size
};

// Selects ceil(q * N) records with lowest likelihood and reports which share
// of the ceil(worst_fraction * N) highest-SE records it contains.
RiskSelection risk_selection(std::span<const ForecastRecord> records, double quantile,
                             double worst_fraction = 0.05);

// Trailing moving average (shorter at the start); plot columns only.
std::vector<double> moving_average(std::span<const double> xs, std::size_t width = 12);

// id,se,cwll,s_pred,s_ll,ce
void write_records(std::ostream& out, std::span<const ForecastRecord> records);
std::vector<ForecastRecord> read_records(std::istream& in);

}  // namespace recown
