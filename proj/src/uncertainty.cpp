#include "recown/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recown/error.hpp"

namespace recown {

TrainLikelihoodStats TrainLikelihoodStats::from(std::span<const double> train_cwll) {
  if (train_cwll.empty()) throw InputError("no training likelihoods to summarize");
  TrainLikelihoodStats s;
  s.ll_min = *std::min_element(train_cwll.begin(), train_cwll.end());
  s.ll_max = *std::max_element(train_cwll.begin(), train_cwll.end());
  if (!std::isfinite(s.ll_min) || !std::isfinite(s.ll_max)) {
    throw DomainError("non-finite training likelihoods");
  }
  s.valid = true;
  return s;
}

double likelihood_ratio(double ll_local, double w, const TrainLikelihoodStats& stats) {
  if (!stats.valid) throw ContractError("training likelihood statistics have not been computed");
  return std::max(0.0, -2.0 * (w * ll_local - stats.ll_max));
}

double llrs(double ll_local, double w, const TrainLikelihoodStats& stats) {
  const double lambda = likelihood_ratio(ll_local, w, stats);
  const double lambda_max = stats.lr_max();
  if (!(lambda_max > 0.0)) {
    throw DomainError("degenerate training likelihoods: maximum likelihood ratio is zero");
  }
  return std::sqrt(lambda / lambda_max);
}

std::vector<double> llrs_curve(std::span<const double> window_ll, std::span<const double> window,
                               std::size_t hop, std::size_t horizon, const TrainLikelihoodStats& stats) {
  if (hop == 0 || window.empty()) throw ContractError("llrs curve needs a window and a positive hop");
  const double lambda_max = stats.lr_max();
  if (!stats.valid) throw ContractError("training likelihood statistics have not been computed");
  if (!(lambda_max > 0.0)) {
    throw DomainError("degenerate training likelihoods: maximum likelihood ratio is zero");
  }
  std::vector<double> num(horizon, 0.0), den(horizon, 0.0);
  for (std::size_t j = 0; j < window_ll.size(); ++j) {
    for (std::size_t k = 0; k < window.size(); ++k) {
      const std::size_t n = j * hop + k;
      if (n >= horizon) break;
      const double w = window[k];
      num[n] += w * likelihood_ratio(window_ll[j], w, stats);
      den[n] += w;
    }
  }
  std::vector<double> out(horizon, 0.0);
  for (std::size_t n = 0; n < horizon; ++n) {
    if (den[n] <= 0.0) throw DomainError("step " + std::to_string(n) + " is not covered by any window");
    out[n] = std::sqrt(num[n] / den[n] / lambda_max);
  }
  return out;
}

UncertaintyBand uncertainty_band(std::span<const double> prediction, std::span<const double> llrs,
                                 double scale) {
  if (prediction.size() != llrs.size()) {
    throw DimensionError("prediction and LLRS curve differ in length");
  }
  UncertaintyBand band;
  band.lower.resize(prediction.size());
  band.upper.resize(prediction.size());
  for (std::size_t n = 0; n < prediction.size(); ++n) {
    band.lower[n] = prediction[n] - scale * llrs[n];
    band.upper[n] = prediction[n] + scale * llrs[n];
  }
  return band;
}

}  // namespace recown
