#include "recown/srnn.hpp"

#include <cmath>

#include "recown/error.hpp"
#include "recown/ops.hpp"

namespace recown {

std::vector<Var> bind_parameters(Tape& tape, const std::vector<NamedTensor>& params,
                                 bool trainable) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const NamedTensor& p : params) {
    vars.push_back(trainable ? tape.parameter(*p.tensor) : tape.constant(*p.tensor));
  }
  return vars;
}

std::size_t parameter_count(const std::vector<NamedTensor>& params) {
  std::size_t n = 0;
  for (const NamedTensor& p : params) n += p.tensor->size();
  return n;
}

void SrnnConfig::validate() const {
  window.validate();
  if (hidden == 0) throw ContractError("hidden size must be positive");
  if (context_len < window.length) throw ContractError("context shorter than one window");
  if (forecast_len == 0 || forecast_len % window.hop != 0) {
    throw ContractError("forecast length must be a positive multiple of the hop");
  }
}

namespace {

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

SrnnWeights SrnnWeights::initialize(const SrnnConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t n_i = config.input_size();
  const std::size_t n_h = config.hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(n_h));
  SrnnWeights w;
  w.w_update = uniform({n_i, n_h}, bound, rng);
  w.u_update = uniform({n_h, n_h}, bound, rng);
  w.b_update = uniform({1, n_h}, bound, rng);
  w.w_reset = uniform({n_i, n_h}, bound, rng);
  w.u_reset = uniform({n_h, n_h}, bound, rng);
  w.b_reset = uniform({1, n_h}, bound, rng);
  w.w_cand = uniform({n_i, n_h}, bound, rng);
  w.u_cand = uniform({n_h, n_h}, bound, rng);
  w.b_cand = uniform({1, n_h}, bound, rng);
  w.w_out = Tensor({n_h, n_i}, 0.0);
  w.sigma = Tensor({1}, config.window.sigma);
  return w;
}

std::vector<NamedTensor> SrnnWeights::parameters() {
  return {{"srnn.w_update", &w_update}, {"srnn.u_update", &u_update}, {"srnn.b_update", &b_update},
          {"srnn.w_reset", &w_reset},   {"srnn.u_reset", &u_reset},   {"srnn.b_reset", &b_reset},
          {"srnn.w_cand", &w_cand},     {"srnn.u_cand", &u_cand},     {"srnn.b_cand", &b_cand},
          {"srnn.w_out", &w_out},       {"srnn.sigma", &sigma}};
}

SrnnVars bind(Tape& tape, SrnnWeights& weights, bool trainable) {
  std::vector<Var> v = bind_parameters(tape, weights.parameters(), trainable);
  return SrnnVars{GruVars{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]}, v[9], v[10]};
}

std::vector<double> project_in(std::span<const std::complex<double>> frame) {
  std::vector<double> out(2 * frame.size());
  for (std::size_t k = 0; k < frame.size(); ++k) {
    out[k] = frame[k].real();
    out[frame.size() + k] = frame[k].imag();
  }
  return out;
}

std::vector<std::complex<double>> project_out(std::span<const double> h) {
  if (h.size() % 2 != 0) throw ContractError("project_out needs an even-length vector");
  const std::size_t half = h.size() / 2;
  std::vector<std::complex<double>> out(half);
  for (std::size_t k = 0; k < half; ++k) out[k] = {h[k], h[half + k]};
  return out;
}

Var gru_cell(const Var& x, const Var& h, const GruVars& w) {
  using namespace ad;
  Var update = sigmoid(matmul(x, w.w_update) + matmul(h, w.u_update) + w.b_update);
  Var reset = sigmoid(matmul(x, w.w_reset) + matmul(h, w.u_reset) + w.b_reset);
  Var cand = tanh(matmul(x, w.w_cand) + matmul(reset * h, w.u_cand) + w.b_cand);
  // (1 - z) h + z c
  return h + update * (cand - h);
}

SrnnForward srnn_forward(const SrnnVars& vars, const Var& context, const SrnnConfig& config,
                         std::size_t horizon) {
  if (horizon == 0 || horizon % config.window.hop != 0) {
    throw ContractError("horizon must be a positive multiple of the hop (" +
                        std::to_string(config.window.hop) + ")");
  }
  Tape& tape = context.tape();
  const std::size_t batch = context.value().dim(0);
  const std::size_t bins = config.bins();
  const std::size_t n_i = 2 * bins;

  SrnnForward out;
  out.window = window_var(config.window, vars.sigma);
  out.context_frames = stft(context, config.window, out.window);

  Var inputs = ad::concat({out.context_frames.re, out.context_frames.im}, 2);
  Var h = tape.constant(Tensor(Shape{batch, config.hidden}, 0.0));
  for (std::size_t tau = 0; tau < out.context_frames.frames; ++tau) {
    Var x = ad::reshape(ad::slice(inputs, 1, tau, tau + 1), Shape{batch, n_i});
    h = gru_cell(x, h, vars.gru);
    ++out.encode_steps;
  }

  const std::size_t steps = horizon / config.window.hop;
  std::vector<Var> re_parts;
  std::vector<Var> im_parts;
  for (std::size_t j = 0; j < steps; ++j) {
    Var y = ad::matmul(h, vars.w_out);
    re_parts.push_back(ad::reshape(ad::slice(y, 1, 0, bins), Shape{batch, 1, bins}));
    im_parts.push_back(ad::reshape(ad::slice(y, 1, bins, n_i), Shape{batch, 1, bins}));
    if (j + 1 < steps) {
      h = gru_cell(y, h, vars.gru);
      ++out.decode_steps;
    }
  }
  out.frames = SpectralVars{ad::concat(re_parts, 1), ad::concat(im_parts, 1), steps, bins};
  out.series = istft(out.frames, config.window, out.window, horizon);
  return out;
}

Forecast forecast(std::span<const double> context, const SrnnConfig& config, SrnnWeights& weights,
                  std::size_t horizon) {
  Tape tape;
  SrnnVars vars = bind(tape, weights, false);
  Var x = tape.constant(Tensor(Shape{1, context.size()}, {context.begin(), context.end()}));
  SrnnForward fwd = srnn_forward(vars, x, config, horizon);
  Forecast out;
  out.series.assign(fwd.series.value().values().begin(), fwd.series.value().values().end());
  out.frames = SpectralFrames(fwd.frames.frames, fwd.frames.bins, config.window.length,
                              config.window.hop);
  out.frames.re.assign(fwd.frames.re.value().values().begin(), fwd.frames.re.value().values().end());
  out.frames.im.assign(fwd.frames.im.value().values().begin(), fwd.frames.im.value().values().end());
  return out;
}

}  // namespace recown
