#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "recown/tape.hpp"

namespace recown {

enum class WindowKind {
  gaussian,
  // w == 1; used to check transforms against textbook DFT identities.
  rectangular,
};

struct WindowParams {
  std::size_t length = 16;  // T_w
  std::size_t hop = 8;      // S
  double sigma = 0.5;
  std::size_t lowpass_factor = 1;
  WindowKind kind = WindowKind::gaussian;

  void validate() const;
  // floor(T_w / 2) + 1 non-redundant bins of a real segment.
  std::size_t full_bins() const noexcept { return length / 2 + 1; }
  // Bins surviving the low-pass filter.
  std::size_t kept_bins() const noexcept {
    return (full_bins() + lowpass_factor - 1) / lowpass_factor;
  }
};

// w(n) = exp(-1/2 ((n - T_w/2) / (sigma T_w / 2))^2) for the Gaussian kind.
double gaussian_window(const WindowParams& params, std::size_t n);
double gaussian_window(const WindowParams& params, double sigma, std::size_t n);
std::vector<double> window_values(const WindowParams& params, double sigma);

// Number of frames for a series of `length` samples: ceil(length / hop).
std::size_t frame_count(std::size_t length, std::size_t hop);

// Complex coefficients of consecutive windows, row-major [frame][bin].
struct SpectralFrames {
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;
  std::size_t window_length = 0;
  std::size_t hop = 0;
  std::vector<double> re;
  std::vector<double> im;

  SpectralFrames() = default;
  SpectralFrames(std::size_t frames, std::size_t bins, std::size_t window_length, std::size_t hop);

  std::complex<double> at(std::size_t frame, std::size_t bin) const {
    return {re[frame * num_bins + bin], im[frame * num_bins + bin]};
  }
  void set(std::size_t frame, std::size_t bin, std::complex<double> value) {
    re[frame * num_bins + bin] = value.real();
    im[frame * num_bins + bin] = value.imag();
  }
};

// Batched coefficients on a tape; `re` and `im` have shape [batch, frames, bins].
struct SpectralVars {
  Var re;
  Var im;
  std::size_t frames = 0;
  std::size_t bins = 0;
};

// Differentiable window of shape [T_w]; `sigma` is a one-element variable.
Var window_var(const WindowParams& params, const Var& sigma);

// STFT of a batch x [batch, T]. The series is left-padded by edge replication
// to a multiple of the hop; windows running past the end see zeros. Only the
// low-passed bins are computed.
SpectralVars stft(const Var& x, const WindowParams& params, const Var& window);

// Weighted overlap-add inverse producing [batch, length]. Dropped bins are
// treated as zero and the Hermitian mirror is implied, so output is real.
// Throws DomainError where the squared-window coverage falls below 1e-10.
Var istft(const SpectralVars& frames, const WindowParams& params, const Var& window,
          std::size_t length);

// Convenience wrappers for a single series with a fixed window.
SpectralFrames stft(std::span<const double> x, const WindowParams& params);
std::vector<double> istft(const SpectralFrames& frames, const WindowParams& params,
                          std::size_t length);

// Keeps the ceil(bins / factor) lowest-frequency bins.
SpectralFrames lowpass(const SpectralFrames& frames_full, std::size_t factor);

// Full length-T_w spectrum per frame with the conjugate mirror filled in;
// dropped bins are zero, imaginary parts at DC and Nyquist are discarded.
std::vector<std::complex<double>> hermitian_extend(const SpectralFrames& frames);

}  // namespace recown
