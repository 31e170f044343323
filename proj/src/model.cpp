#include "recown/model.hpp"

#include <algorithm>

#include "recown/error.hpp"

namespace recown {

void ModelConfig::validate() const {
  srnn.validate();
  if (num_vars() < 2) throw ConfigError("the forecast must span at least two spectral coefficients");
  if (cwspn.structure.depth < 1) throw ConfigError("circuit depth must be >= 1");
  if (cwspn.structure.repetitions < 1 || cwspn.structure.sums < 1 || cwspn.structure.leaves < 1) {
    throw ConfigError("circuit repetitions, sums and leaves must be >= 1");
  }
}

Recown Recown::create(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  Recown m;
  m.config = config;
  m.config.cwspn.structure.seed = config.seed;
  m.srnn = SrnnWeights::initialize(config.srnn, rng);
  m.cwspn = Cwspn::create(config.num_vars(), config.conditioner_inputs(), m.config.cwspn, rng);
  return m;
}

WindowParams Recown::window() const {
  WindowParams p = config.srnn.window;
  p.sigma = srnn.sigma[0];
  return p;
}

std::vector<Prediction> predict(Recown& model, const std::vector<std::vector<double>>& contexts,
                                std::size_t batch_size) {
  const SrnnConfig& cfg = model.config.srnn;
  if (batch_size == 0) throw ContractError("batch size must be positive");
  std::vector<Prediction> out(contexts.size());
  for (std::size_t start = 0; start < contexts.size(); start += batch_size) {
    const std::size_t b = std::min(batch_size, contexts.size() - start);
    Tensor ctx(Shape{b, cfg.context_len});
    for (std::size_t i = 0; i < b; ++i) {
      const auto& c = contexts[start + i];
      if (c.size() != cfg.context_len) {
        throw DimensionError("context of length " + std::to_string(c.size()) + ", model expects " +
                             std::to_string(cfg.context_len));
      }
      std::copy(c.begin(), c.end(), ctx.data() + i * cfg.context_len);
    }
    Tape tape;
    SrnnVars sv = bind(tape, model.srnn, false);
    ConditionerVars cv = bind(tape, model.cwspn.conditioner, false);
    SrnnForward fwd = srnn_forward(sv, tape.constant(std::move(ctx)), cfg, cfg.forecast_len);
    Var ll = cwll(model.cwspn.circuit(), cv, fwd.frames, fwd.context_frames);
    const auto series = fwd.series.value().values();
    for (std::size_t i = 0; i < b; ++i) {
      Prediction& p = out[start + i];
      p.series.assign(series.begin() + static_cast<std::ptrdiff_t>(i * cfg.forecast_len),
                      series.begin() + static_cast<std::ptrdiff_t>((i + 1) * cfg.forecast_len));
      p.cwll = ll.value()[i];
    }
  }
  return out;
}

UncertainForecast forecast_with_uncertainty(Recown& model, std::span<const double> context,
                                            std::size_t horizon, double band_scale,
                                            BlockConditioning mode) {
  const SrnnConfig& cfg = model.config.srnn;
  const std::size_t hop = cfg.window.hop;
  if (horizon == 0 || horizon % hop != 0) {
    throw ConfigError("horizon must be a positive multiple of the hop " + std::to_string(hop));
  }
  if (context.size() != cfg.context_len) throw DimensionError("context length does not match the model");
  const Forecast fc = forecast(context, cfg, model.srnn, horizon);
  const WindowParams params = model.window();
  const std::size_t bins = cfg.bins();
  const std::size_t block_frames = cfg.forecast_frames();
  const std::size_t total_frames = horizon / hop;
  const std::size_t vars = model.config.num_vars();
  const double scale = static_cast<double>(vars) / static_cast<double>(bins);

  std::vector<double> history(context.begin(), context.end());
  history.insert(history.end(), fc.series.begin(), fc.series.end());

  UncertainForecast out;
  out.series = fc.series;
  out.window_ll.resize(total_frames);
  for (std::size_t b0 = 0; b0 < total_frames; b0 += block_frames) {
    // most recent context_len samples before this block
    const std::size_t end = cfg.context_len + (mode == BlockConditioning::rolling ? b0 * hop : 0);
    const std::span<const double> recent(history.data() + (end - cfg.context_len), cfg.context_len);
    const SpectralFrames ctx = stft(recent, params);
    const std::vector<double> decoded = condition(model.cwspn, ctx);
    std::vector<double> values(2 * vars, 0.0);
    const std::size_t present = std::min(block_frames, total_frames - b0);
    for (std::size_t f = 0; f < present; ++f) {
      for (std::size_t k = 0; k < bins; ++k) {
        const std::size_t atom = f * bins + k;
        const auto c = fc.frames.at(b0 + f, k);
        values[2 * atom] = c.real();
        values[2 * atom + 1] = c.imag();
      }
    }
    std::vector<std::uint8_t> mask(vars, 0);
    for (std::size_t f = 0; f < present; ++f) {
      std::fill(mask.begin(), mask.end(), 0);
      std::fill(mask.begin() + static_cast<std::ptrdiff_t>(f * bins),
                mask.begin() + static_cast<std::ptrdiff_t>((f + 1) * bins), 1);
      out.window_ll[b0 + f] = scale * marginal_cwll(model.cwspn.circuit(), decoded, values, mask);
    }
  }
  const std::vector<double> w = window_values(params, params.sigma);
  out.llrs = llrs_curve(out.window_ll, w, hop, horizon, model.likelihood);
  out.band = uncertainty_band(out.series, out.llrs, band_scale);
  return out;
}

}  // namespace recown
