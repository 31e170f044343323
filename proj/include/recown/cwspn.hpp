#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "recown/circuit.hpp"
#include "recown/parameters.hpp"
#include "recown/spectral.hpp"

namespace recown {

struct CwspnConfig {
  StructureParams structure;
  // Conditioner hidden width; 0 selects twice the input dimension.
  std::size_t hidden = 0;
};

// Two tanh hidden layers and a linear output emitting one raw value per
// circuit parameter slot.
struct ConditionerWeights {
  Tensor w1, b1, w2, b2, w3, b3;

  static ConditionerWeights initialize(std::size_t inputs, std::size_t hidden, std::size_t outputs,
                                       std::mt19937_64& rng);
  std::vector<NamedTensor> parameters();
  std::size_t input_size() const { return w1.dim(0); }
  std::size_t output_size() const { return w3.dim(1); }
};

struct ConditionerVars {
  Var w1, b1, w2, b2, w3, b3;
};

ConditionerVars bind(Tape& tape, ConditionerWeights& weights, bool trainable);

// Circuit over (window, bin) atoms of the forecast plus its conditioner.
struct Cwspn {
  CwspnConfig config;
  Structure structure;
  ConditionerWeights conditioner;

  static Cwspn create(std::size_t num_vars, std::size_t conditioner_inputs, const CwspnConfig& config,
                      std::mt19937_64& rng);
  const Circuit& circuit() const { return structure.circuit; }
};

// Frames [B x n x K] (re, im) -> [B x n*2K], each frame laid out Re || Im.
Var flatten_frames(const SpectralVars& frames);
// Frames -> [B x 2V] (re, im) pairs, atom index = frame * K + bin.
Var coefficient_values(const SpectralVars& frames);

std::vector<double> coefficient_values(const SpectralFrames& frames);

// Raw circuit parameters [B x P] for each context.
Var condition(const ConditionerVars& vars, const SpectralVars& context_frames);

// Conditional Whittle log-likelihood of predicted frames given the context
// frames, per batch row.
Var cwll(const Circuit& circuit, const ConditionerVars& vars, const SpectralVars& predicted,
         const SpectralVars& context, std::vector<std::uint8_t> observed = {});

// Decoded circuit parameters for a single context.
std::vector<double> condition(Cwspn& model, const SpectralFrames& context);

double cwll(Cwspn& model, const SpectralFrames& predicted, const SpectralFrames& context);

// Marginal log-likelihood over the atoms with observed[v] != 0.
double marginal_cwll(const Circuit& circuit, std::span<const double> decoded,
                     std::span<const double> values, std::span<const std::uint8_t> observed);

}  // namespace recown
