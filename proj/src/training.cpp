#include "recown/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "recown/error.hpp"
#include "recown/ops.hpp"

namespace recown {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(lr_srnn > 0.0) || !(lr_cwspn > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("adam epsilon must be positive");
  if (!(se_floor > 0.0)) throw ConfigError("se_floor must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
  if (!(sigma_floor > 0.0)) throw ConfigError("sigma floor must be positive");
}

Adam::Adam(const std::vector<NamedTensor>& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.emplace_back(p.tensor->size(), 0.0);
    v_.emplace_back(p.tensor->size(), 0.0);
  }
}

void Adam::step(const std::vector<NamedTensor>& params, std::span<const Tensor> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ContractError("optimizer was built for a different parameter list");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<double> w = params[i].tensor->values();
    std::span<const double> g = grads[i].values();
    if (g.size() != w.size()) throw DimensionError("gradient size mismatch for " + params[i].name);
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squared_norm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& g : grads) {
      for (double& x : g.values()) x *= f;
    }
  }
  return norm;
}

double mse_loss(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw ContractError("prediction and ground truth differ in length");
  if (pred.empty()) throw ContractError("empty horizon");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  return total / static_cast<double>(pred.size());
}

Var mse_loss(const Var& pred, const Var& gt) {
  if (pred.shape() != gt.shape()) throw ContractError("prediction and ground truth differ in shape");
  return ad::mean(ad::square(ad::sub(pred, gt)));
}

std::vector<double> per_sample_se(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape() || pred.rank() != 2) throw ContractError("expected matching [B x H] tensors");
  const std::size_t b = pred.dim(0), h = pred.dim(1);
  std::vector<double> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    out[i] = mse_loss(pred.values().subspan(i * h, h), gt.values().subspan(i * h, h));
  }
  return out;
}

namespace {

std::vector<double> nll_weights(std::span<const double> se, double se_floor) {
  std::vector<double> w(se.size());
  for (std::size_t i = 0; i < se.size(); ++i) {
    const double s = std::max(se[i], se_floor);
    w[i] = 1.0 / (s * s);
  }
  return w;
}

}  // namespace

double weighted_nll_loss(std::span<const double> ll, std::span<const double> se, double se_floor) {
  if (ll.size() != se.size() || ll.empty()) throw ContractError("likelihoods and errors differ in count");
  const std::vector<double> w = nll_weights(se, se_floor);
  double total = 0.0;
  for (std::size_t i = 0; i < ll.size(); ++i) total += ll[i] * w[i];
  return -total / static_cast<double>(ll.size());
}

Var weighted_nll_loss(const Var& ll, std::span<const double> se, double se_floor) {
  if (ll.value().size() != se.size() || se.empty()) throw ContractError("likelihoods and errors differ in count");
  Var w = ll.tape().constant(Tensor(ll.shape(), nll_weights(se, se_floor)));
  return ad::neg(ad::mean(ad::mul(ll, w)));
}

Batch make_batch(std::span<const WindowPair> pairs, std::span<const std::size_t> order, std::size_t id) {
  if (order.empty()) throw ContractError("empty batch");
  const std::size_t tc = pairs[order[0]].context.size();
  const std::size_t tf = pairs[order[0]].target.size();
  Batch b;
  b.id = id;
  b.contexts = Tensor(Shape{order.size(), tc});
  b.targets = Tensor(Shape{order.size(), tf});
  for (std::size_t i = 0; i < order.size(); ++i) {
    const WindowPair& p = pairs[order[i]];
    if (p.context.size() != tc || p.target.size() != tf) throw DimensionError("ragged windows in batch");
    std::copy(p.context.begin(), p.context.end(), b.contexts.data() + i * tc);
    std::copy(p.target.begin(), p.target.end(), b.targets.data() + i * tf);
  }
  return b;
}

TrainState TrainState::create(Recown& model, const TrainConfig& c) {
  return TrainState{Adam(model.srnn.parameters(), c.lr_srnn, c.beta1, c.beta2, c.eps),
                    Adam(model.cwspn.conditioner.parameters(), c.lr_cwspn, c.beta1, c.beta2, c.eps)};
}

namespace {

std::string norms_report(const std::vector<NamedTensor>& params) {
  std::ostringstream os;
  for (const auto& p : params) os << ' ' << p.name << '=' << std::sqrt(p.tensor->squared_norm());
  return os.str();
}

[[noreturn]] void abort_training(const char* phase, std::size_t batch, Recown& model) {
  throw TrainingError(std::string("non-finite ") + phase + " loss at batch " + std::to_string(batch) +
                      "; parameter norms:" + norms_report(model.srnn.parameters()) +
                      norms_report(model.cwspn.conditioner.parameters()));
}

std::vector<Tensor> collect(const Gradients& grads, const std::vector<Var>& vars) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (const Var& v : vars) out.push_back(grads.of(v));
  return out;
}

}  // namespace

StepMetrics coordinate_step(Recown& model, TrainState& state, const Batch& batch, const TrainConfig& config) {
  const SrnnConfig& cfg = model.config.srnn;
  StepMetrics metrics;
  metrics.batch = batch.id;

  {
    Tape tape;
    const auto params = model.srnn.parameters();
    const std::vector<Var> v = bind_parameters(tape, params, true);
    const SrnnVars sv{GruVars{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]}, v[9], v[10]};
    SrnnForward fwd = srnn_forward(sv, tape.constant(batch.contexts), cfg, cfg.forecast_len);
    Var loss = mse_loss(fwd.series, tape.constant(batch.targets));
    metrics.mse = loss.value().item();
    if (!std::isfinite(metrics.mse)) abort_training("mse", batch.id, model);
    const Gradients grads = tape.backward(loss);
    std::vector<Tensor> g = collect(grads, v);
    clip_global_norm(g, config.clip_norm);
    state.srnn.step(params, g);
    double& sigma = model.srnn.sigma[0];
    sigma = std::max(sigma, config.sigma_floor);
  }

  {
    Tape tape;
    const SrnnVars sv = bind(tape, model.srnn, false);
    SrnnForward fwd = srnn_forward(sv, tape.constant(batch.contexts), cfg, cfg.forecast_len);
    const std::vector<double> se = per_sample_se(fwd.series.value(), batch.targets);
    const auto params = model.cwspn.conditioner.parameters();
    const std::vector<Var> v = bind_parameters(tape, params, true);
    const ConditionerVars cv{v[0], v[1], v[2], v[3], v[4], v[5]};
    Var ll = cwll(model.cwspn.circuit(), cv, fwd.frames, fwd.context_frames);
    Var loss = weighted_nll_loss(ll, se, config.se_floor);
    metrics.loss = loss.value().item();
    const auto llv = ll.value().values();
    metrics.cwll = std::accumulate(llv.begin(), llv.end(), 0.0) / static_cast<double>(llv.size());
    if (!std::isfinite(metrics.loss)) abort_training("likelihood", batch.id, model);
    const Gradients grads = tape.backward(loss);
    std::vector<Tensor> g = collect(grads, v);
    clip_global_norm(g, config.clip_norm);
    state.cwspn.step(params, g);
  }
  return metrics;
}

double evaluate_mse(Recown& model, std::span<const WindowPair> pairs) {
  if (pairs.empty()) throw InputError("no sequences to evaluate");
  std::vector<std::vector<double>> contexts;
  contexts.reserve(pairs.size());
  for (const auto& p : pairs) contexts.push_back(p.context);
  const std::vector<double> series = [&] {
    std::vector<double> out;
    const std::size_t h = model.config.srnn.forecast_len;
    for (std::size_t start = 0; start < contexts.size(); start += 256) {
      const std::size_t b = std::min<std::size_t>(256, contexts.size() - start);
      Tensor ctx(Shape{b, model.config.srnn.context_len});
      for (std::size_t i = 0; i < b; ++i) {
        std::copy(contexts[start + i].begin(), contexts[start + i].end(),
                  ctx.data() + i * model.config.srnn.context_len);
      }
      Tape tape;
      SrnnForward fwd = srnn_forward(bind(tape, model.srnn, false), tape.constant(std::move(ctx)),
                                     model.config.srnn, h);
      const auto v = fwd.series.value().values();
      out.insert(out.end(), v.begin(), v.end());
    }
    return out;
  }();
  const std::size_t h = model.config.srnn.forecast_len;
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    total += mse_loss(std::span<const double>(series).subspan(i * h, h), pairs[i].target);
  }
  return total / static_cast<double>(pairs.size());
}

namespace {

void emit(std::ostream* log, const nlohmann::json& record) {
  if (log) *log << record.dump() << '\n';
}

}  // namespace

TrainResult train(const Dataset& data, const ModelConfig& model_config, const TrainConfig& config,
                  std::ostream* log) {
  config.validate();
  if (data.train.empty()) throw InputError("training split is empty");
  for (const auto& p : data.train) {
    if (p.context.size() != model_config.srnn.context_len || p.target.size() != model_config.srnn.forecast_len) {
      throw DimensionError("dataset windows do not match the configured context/forecast lengths");
    }
  }
  TrainResult result{Recown::create(model_config), {}, 0};
  Recown& model = result.model;
  model.norm = data.norm;
  TrainState state = TrainState::create(model, config);
  const bool has_val = !data.validation.empty();
  auto val_mse = [&] { return has_val ? evaluate_mse(model, data.validation) : evaluate_mse(model, data.train); };

  EpochSummary initial;
  initial.val_mse = val_mse();
  result.epochs.push_back(initial);
  emit(log, {{"epoch", 0}, {"val_mse", initial.val_mse}});
  double best = initial.val_mse;
  SrnnWeights best_srnn = model.srnn;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.train.size());
  std::size_t batch_id = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    EpochSummary summary;
    summary.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      const Batch batch = make_batch(data.train, std::span<const std::size_t>(order).subspan(start, n), batch_id++);
      const StepMetrics m = coordinate_step(model, state, batch, config);
      emit(log, {{"epoch", epoch}, {"batch", m.batch}, {"mse", m.mse}, {"cwll", m.cwll}, {"loss", m.loss}});
      summary.train_mse += m.mse;
      summary.train_loss += m.loss;
      ++batches;
    }
    summary.train_mse /= static_cast<double>(batches);
    summary.train_loss /= static_cast<double>(batches);
    summary.val_mse = val_mse();
    emit(log, {{"epoch", epoch},
               {"train_mse", summary.train_mse},
               {"train_loss", summary.train_loss},
               {"val_mse", summary.val_mse}});
    result.epochs.push_back(summary);
    if (summary.val_mse < best) {
      best = summary.val_mse;
      best_srnn = model.srnn;
      result.best_epoch = epoch;
    }
  }
  model.srnn = best_srnn;

  std::vector<std::vector<double>> contexts;
  contexts.reserve(data.train.size());
  for (const auto& p : data.train) contexts.push_back(p.context);
  std::vector<double> ll;
  for (const Prediction& p : predict(model, contexts)) ll.push_back(p.cwll);
  model.likelihood = TrainLikelihoodStats::from(ll);
  return result;
}

}  // namespace recown
