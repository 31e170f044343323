#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "recown/cwspn.hpp"
#include "recown/data.hpp"
#include "recown/srnn.hpp"
#include "recown/uncertainty.hpp"

namespace recown {

struct ModelConfig {
  SrnnConfig srnn;
  CwspnConfig cwspn;
  std::uint64_t seed = 7;

  void validate() const;
  std::size_t num_vars() const { return srnn.forecast_frames() * srnn.bins(); }
  std::size_t conditioner_inputs() const { return srnn.context_frames() * 2 * srnn.bins(); }
};

// Spectral forecaster plus the conditional circuit judging its output.
struct Recown {
  ModelConfig config;
  SrnnWeights srnn;
  Cwspn cwspn;
  NormStats norm;
  TrainLikelihoodStats likelihood;

  static Recown create(const ModelConfig& config);
  // Window parameters with the learned width.
  WindowParams window() const;
};

struct Prediction {
  std::vector<double> series;
  double cwll = 0.0;
};

// Forecast of the trained length and its CWLL for every context.
std::vector<Prediction> predict(Recown& model, const std::vector<std::vector<double>>& contexts,
                                std::size_t batch_size = 64);

struct UncertainForecast {
  std::vector<double> series;
  std::vector<double> window_ll;  // localized log-likelihood per predicted window
  std::vector<double> llrs;
  UncertaintyBand band;
};

// How blocks past the first are conditioned.
enum class BlockConditioning {
  rolling,  // most recent context-length samples of context ++ predictions
  fixed,    // always the original context
};

// Rolls the forecaster out over `horizon` steps (a multiple of the hop).
// The horizon is cut into blocks of the trained forecast length, each judged
// by the circuit under the chosen conditioning. A window's localized
// likelihood is its marginal CWLL scaled to the full block's variable count.
UncertainForecast forecast_with_uncertainty(Recown& model, std::span<const double> context,
                                            std::size_t horizon, double band_scale = 1.0,
                                            BlockConditioning mode = BlockConditioning::fixed);

}  // namespace recown
