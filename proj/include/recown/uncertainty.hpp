#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace recown {

// Extreme CWLL values over the training set.
struct TrainLikelihoodStats {
  double ll_min = 0.0;
  double ll_max = 0.0;
  bool valid = false;

  static TrainLikelihoodStats from(std::span<const double> train_cwll);
  double lr_max() const noexcept { return -2.0 * (ll_min - ll_max); }
};

// -2 (w * ll_local - ll_max), clamped at zero.
double likelihood_ratio(double ll_local, double w, const TrainLikelihoodStats& stats);

// sqrt(lambda_LR / lambda_LRMax).
double llrs(double ll_local, double w, const TrainLikelihoodStats& stats);

// Per-step LLRS over a horizon covered by windows starting every `hop`
// steps. window_ll[j] is the localized log-likelihood of window j and
// `window` the analysis window; steps under several windows use the
// w-weighted average of their ratios.
std::vector<double> llrs_curve(std::span<const double> window_ll, std::span<const double> window,
                               std::size_t hop, std::size_t horizon, const TrainLikelihoodStats& stats);

struct UncertaintyBand {
  std::vector<double> lower;
  std::vector<double> upper;
};

UncertaintyBand uncertainty_band(std::span<const double> prediction, std::span<const double> llrs,
                                 double scale = 1.0);

}  // namespace recown
