#include "recown/cwspn.hpp"

#include <cmath>

#include "recown/error.hpp"
#include "recown/ops.hpp"

namespace recown {

namespace {

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

SpectralVars frames_on_tape(Tape& tape, const SpectralFrames& f) {
  const Shape shape{1, f.num_frames, f.num_bins};
  return SpectralVars{tape.constant(Tensor(shape, f.re)), tape.constant(Tensor(shape, f.im)),
                      f.num_frames, f.num_bins};
}

}  // namespace

ConditionerWeights ConditionerWeights::initialize(std::size_t inputs, std::size_t hidden,
                                                  std::size_t outputs, std::mt19937_64& rng) {
  if (inputs == 0 || hidden == 0 || outputs == 0) throw ContractError("conditioner sizes must be positive");
  const double b_in = 1.0 / std::sqrt(static_cast<double>(inputs));
  const double b_hid = 1.0 / std::sqrt(static_cast<double>(hidden));
  ConditionerWeights w;
  w.w1 = uniform({inputs, hidden}, b_in, rng);
  w.b1 = uniform({1, hidden}, b_in, rng);
  w.w2 = uniform({hidden, hidden}, b_hid, rng);
  w.b2 = uniform({1, hidden}, b_hid, rng);
  w.w3 = uniform({hidden, outputs}, b_hid, rng);
  w.b3 = uniform({1, outputs}, b_hid, rng);
  return w;
}

std::vector<NamedTensor> ConditionerWeights::parameters() {
  return {{"cond.w1", &w1}, {"cond.b1", &b1}, {"cond.w2", &w2},
          {"cond.b2", &b2}, {"cond.w3", &w3}, {"cond.b3", &b3}};
}

ConditionerVars bind(Tape& tape, ConditionerWeights& weights, bool trainable) {
  std::vector<Var> v = bind_parameters(tape, weights.parameters(), trainable);
  return ConditionerVars{v[0], v[1], v[2], v[3], v[4], v[5]};
}

Cwspn Cwspn::create(std::size_t num_vars, std::size_t conditioner_inputs, const CwspnConfig& config,
                    std::mt19937_64& rng) {
  Cwspn model;
  model.config = config;
  model.structure = build_structure(num_vars, config.structure);
  const std::size_t hidden = config.hidden ? config.hidden : 2 * conditioner_inputs;
  model.conditioner = ConditionerWeights::initialize(conditioner_inputs, hidden,
                                                     model.structure.circuit.num_params(), rng);
  return model;
}

Var flatten_frames(const SpectralVars& frames) {
  const std::size_t batch = frames.re.value().dim(0);
  Var joined = ad::concat({frames.re, frames.im}, 2);
  return ad::reshape(joined, Shape{batch, frames.frames * 2 * frames.bins});
}

Var coefficient_values(const SpectralVars& frames) {
  const std::size_t batch = frames.re.value().dim(0);
  const Shape atom_shape{batch, frames.frames, frames.bins, 1};
  Var pairs = ad::concat({ad::reshape(frames.re, atom_shape), ad::reshape(frames.im, atom_shape)}, 3);
  return ad::reshape(pairs, Shape{batch, 2 * frames.frames * frames.bins});
}

std::vector<double> coefficient_values(const SpectralFrames& frames) {
  std::vector<double> values(2 * frames.re.size());
  for (std::size_t i = 0; i < frames.re.size(); ++i) {
    values[2 * i] = frames.re[i];
    values[2 * i + 1] = frames.im[i];
  }
  return values;
}

Var condition(const ConditionerVars& vars, const SpectralVars& context_frames) {
  using namespace ad;
  Var x = flatten_frames(context_frames);
  Var h1 = tanh(matmul(x, vars.w1) + vars.b1);
  Var h2 = tanh(matmul(h1, vars.w2) + vars.b2);
  return matmul(h2, vars.w3) + vars.b3;
}

Var cwll(const Circuit& circuit, const ConditionerVars& vars, const SpectralVars& predicted,
         const SpectralVars& context, std::vector<std::uint8_t> observed) {
  if (predicted.frames * predicted.bins != circuit.num_vars()) {
    throw ContractError("predicted frames hold " + std::to_string(predicted.frames * predicted.bins) +
                        " coefficients but the circuit models " + std::to_string(circuit.num_vars()));
  }
  Var raw = condition(vars, context);
  return circuit_log_likelihood(circuit, raw, coefficient_values(predicted), std::move(observed));
}

std::vector<double> condition(Cwspn& model, const SpectralFrames& context) {
  Tape tape;
  ConditionerVars vars = bind(tape, model.conditioner, false);
  Var raw = condition(vars, frames_on_tape(tape, context));
  return decode_params(model.circuit(), raw.value().values());
}

double cwll(Cwspn& model, const SpectralFrames& predicted, const SpectralFrames& context) {
  Tape tape;
  ConditionerVars vars = bind(tape, model.conditioner, false);
  Var out = cwll(model.circuit(), vars, frames_on_tape(tape, predicted), frames_on_tape(tape, context));
  return out.value()[0];
}

double marginal_cwll(const Circuit& circuit, std::span<const double> decoded,
                     std::span<const double> values, std::span<const std::uint8_t> observed) {
  if (observed.size() != circuit.num_vars()) throw ContractError("observation mask size mismatch");
  return log_likelihood(circuit, decoded, values, observed);
}

}  // namespace recown
