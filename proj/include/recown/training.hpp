#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "recown/data.hpp"
#include "recown/model.hpp"

namespace recown {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  double lr_srnn = 1e-3;
  double lr_cwspn = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double se_floor = 1e-4;
  double clip_norm = 5.0;
  // Lower bound kept on the learned window width.
  double sigma_floor = 0.05;
  std::uint64_t seed = 7;

  void validate() const;
};

// Adaptive-moment optimizer over a fixed list of tensors.
class Adam {
 public:
  Adam(const std::vector<NamedTensor>& params, double lr, double beta1, double beta2, double eps);
  void step(const std::vector<NamedTensor>& params, std::span<const Tensor> grads);
  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Rescales in place so the joint L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

double mse_loss(std::span<const double> pred, std::span<const double> gt);
Var mse_loss(const Var& pred, const Var& gt);

// Per-row mean squared error of pred [B x H] against gt [B x H].
std::vector<double> per_sample_se(const Tensor& pred, const Tensor& gt);

// -(1/M) sum_i ll_i / max(se_i, floor)^2; the weights are constants.
double weighted_nll_loss(std::span<const double> ll, std::span<const double> se, double se_floor);
Var weighted_nll_loss(const Var& ll, std::span<const double> se, double se_floor);

struct Batch {
  std::size_t id = 0;
  Tensor contexts;  // [B x context_len]
  Tensor targets;   // [B x forecast_len]
};

Batch make_batch(std::span<const WindowPair> pairs, std::span<const std::size_t> order, std::size_t id);

struct TrainState {
  Adam srnn;
  Adam cwspn;
  static TrainState create(Recown& model, const TrainConfig& config);
};

struct StepMetrics {
  std::size_t batch = 0;
  double mse = 0.0;
  double cwll = 0.0;  // batch mean
  double loss = 0.0;  // weighted NLL
};

// One SRNN step on MSE, then one conditioner step on the weighted NLL of the
// updated SRNN's predictions with the SRNN frozen.
StepMetrics coordinate_step(Recown& model, TrainState& state, const Batch& batch,
                            const TrainConfig& config);

struct EpochSummary {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double train_loss = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  Recown model;
  std::vector<EpochSummary> epochs;  // entry 0 is the untrained model
  std::size_t best_epoch = 0;
};

// Validation MSE of the current forecaster.
double evaluate_mse(Recown& model, std::span<const WindowPair> pairs);

// Trains from a freshly initialized model. Log lines (one JSON object per
// batch and per epoch) go to `log` when given. Returns the SRNN of the epoch
// with the best validation MSE and the final conditioner, with training
// likelihood statistics filled in.
TrainResult train(const Dataset& data, const ModelConfig& model_config, const TrainConfig& config,
                  std::ostream* log = nullptr);

}  // namespace recown
