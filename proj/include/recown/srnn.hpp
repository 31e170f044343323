#pragma once

#include <complex>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "recown/parameters.hpp"
#include "recown/spectral.hpp"
#include "recown/tape.hpp"

namespace recown {

struct SrnnConfig {
  std::size_t hidden = 32;  // n_h
  WindowParams window;
  std::size_t context_len = 96;
  std::size_t forecast_len = 32;

  void validate() const;
  std::size_t bins() const noexcept { return window.kept_bins(); }
  std::size_t input_size() const noexcept { return 2 * bins(); }
  std::size_t context_frames() const noexcept { return frame_count(context_len, window.hop); }
  std::size_t forecast_frames() const noexcept { return forecast_len / window.hop; }
};

// Single-layer GRU over projected STFT frames plus the output projection
// back to (Re || Im) coefficients. Input matrices are [2K x n_h], recurrent
// matrices [n_h x n_h], biases [1 x n_h], output projection [n_h x 2K].
struct SrnnWeights {
  Tensor w_update, u_update, b_update;
  Tensor w_reset, u_reset, b_reset;
  Tensor w_cand, u_cand, b_cand;
  Tensor w_out;
  Tensor sigma;  // learned window width, shape [1]

  static SrnnWeights initialize(const SrnnConfig& config, std::mt19937_64& rng);
  std::vector<NamedTensor> parameters();
};

struct GruVars {
  Var w_update, u_update, b_update;
  Var w_reset, u_reset, b_reset;
  Var w_cand, u_cand, b_cand;
};

struct SrnnVars {
  GruVars gru;
  Var w_out;
  Var sigma;
};

SrnnVars bind(Tape& tape, SrnnWeights& weights, bool trainable);

// (Re(frame) || Im(frame)).
std::vector<double> project_in(std::span<const std::complex<double>> frame);
// First half + i * second half. Throws ContractError on odd length.
std::vector<std::complex<double>> project_out(std::span<const double> h);

// Standard GRU update for a batch: x [B x n_i], h [B x n_h].
Var gru_cell(const Var& x, const Var& h, const GruVars& w);

struct SrnnForward {
  Var series;                  // [B x horizon]
  SpectralVars frames;         // predicted, [B x horizon/S x K]
  SpectralVars context_frames; // [B x n_c x K]
  Var window;
  std::size_t encode_steps = 0;
  std::size_t decode_steps = 0;
};

// Encodes the context frames, then emits horizon/S frames autoregressively,
// feeding each prediction back as the next input; decodes via istft.
SrnnForward srnn_forward(const SrnnVars& vars, const Var& context, const SrnnConfig& config,
                         std::size_t horizon);

struct Forecast {
  std::vector<double> series;
  SpectralFrames frames;
};

Forecast forecast(std::span<const double> context, const SrnnConfig& config,
                  SrnnWeights& weights, std::size_t horizon);

}  // namespace recown
