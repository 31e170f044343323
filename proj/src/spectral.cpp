#include "recown/spectral.hpp"

#include <cmath>
#include <numbers>

#include "recown/error.hpp"
#include "recown/ops.hpp"

namespace recown {

namespace {

constexpr double kCoverageFloor = 1e-10;

// Source sample for padded position q, or -1 for the zero tail.
std::int64_t source_index(std::size_t q, std::size_t pad, std::size_t length) {
  if (q < pad) return 0;
  const std::size_t src = q - pad;
  return src < length ? static_cast<std::int64_t>(src) : -1;
}

Tensor forward_basis(const WindowParams& p, bool imag) {
  const std::size_t bins = p.kept_bins();
  Tensor basis(Shape{p.length, bins});
  for (std::size_t t = 0; t < p.length; ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k * t) /
                           static_cast<double>(p.length);
      basis.at(t, k) = imag ? -std::sin(angle) : std::cos(angle);
    }
  }
  return basis;
}

// Real part of the inverse DFT of a Hermitian-extended spectrum expressed as
// two real [bins x T_w] maps applied to (Re, Im).
Tensor inverse_basis(const WindowParams& p, std::size_t bins, bool imag) {
  Tensor basis(Shape{bins, p.length});
  const double n = static_cast<double>(p.length);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool self_conjugate = k == 0 || (p.length % 2 == 0 && k == p.length / 2);
    const double weight = (self_conjugate ? 1.0 : 2.0) / n;
    for (std::size_t t = 0; t < p.length; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k * t) / n;
      basis.at(k, t) = imag ? -weight * std::sin(angle) : weight * std::cos(angle);
    }
  }
  return basis;
}

}  // namespace

void WindowParams::validate() const {
  if (length == 0) throw ContractError("window length must be positive");
  if (hop == 0 || hop > length) throw ContractError("hop must satisfy 1 <= S <= T_w");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ContractError("window sigma must be > 0");
  if (lowpass_factor == 0) throw ContractError("low-pass factor must be >= 1");
}

double gaussian_window(const WindowParams& params, double sigma, std::size_t n) {
  if (params.kind == WindowKind::rectangular) return 1.0;
  const double half = static_cast<double>(params.length) / 2.0;
  const double u = (static_cast<double>(n) - half) / (sigma * half);
  return std::exp(-0.5 * u * u);
}

double gaussian_window(const WindowParams& params, std::size_t n) {
  return gaussian_window(params, params.sigma, n);
}

std::vector<double> window_values(const WindowParams& params, double sigma) {
  std::vector<double> w(params.length);
  for (std::size_t n = 0; n < params.length; ++n) w[n] = gaussian_window(params, sigma, n);
  return w;
}

std::size_t frame_count(std::size_t length, std::size_t hop) { return (length + hop - 1) / hop; }

SpectralFrames::SpectralFrames(std::size_t frames, std::size_t bins, std::size_t window_length,
                               std::size_t hop)
    : num_frames(frames),
      num_bins(bins),
      window_length(window_length),
      hop(hop),
      re(frames * bins, 0.0),
      im(frames * bins, 0.0) {}

Var window_var(const WindowParams& params, const Var& sigma) {
  Tape& tape = sigma.tape();
  if (params.kind == WindowKind::rectangular) {
    return tape.constant(Tensor(Shape{params.length}, 1.0));
  }
  if (sigma.value().size() != 1) throw DimensionError("sigma must hold one value");
  const double half = static_cast<double>(params.length) / 2.0;
  Tensor offsets(Shape{params.length});
  for (std::size_t n = 0; n < params.length; ++n) {
    offsets[n] = (static_cast<double>(n) - half) / half;
  }
  Var u = ad::div(tape.constant(std::move(offsets)), ad::reshape(sigma, Shape{1}));
  return ad::exp(ad::scale(ad::square(u), -0.5));
}

SpectralVars stft(const Var& x, const WindowParams& params, const Var& window) {
  params.validate();
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("stft expects [batch, T], got " + shape_to_string(xv.shape()));
  const std::size_t batch = xv.dim(0);
  const std::size_t length = xv.dim(1);
  if (length < params.length) {
    throw InputError("series of length " + std::to_string(length) +
                     " is shorter than one window (" + std::to_string(params.length) + ")");
  }
  const std::size_t frames = frame_count(length, params.hop);
  const std::size_t pad = frames * params.hop - length;
  const std::size_t tw = params.length;

  std::vector<std::int64_t> index(frames * tw);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t t = 0; t < tw; ++t) index[m * tw + t] = source_index(m * params.hop + t, pad, length);
  }
  Tape& tape = x.tape();
  Var segments = ad::reshape(ad::gather_last(x, std::move(index)), Shape{batch, frames, tw});
  Var windowed = ad::reshape(ad::mul(segments, window), Shape{batch * frames, tw});
  const std::size_t bins = params.kept_bins();
  Var re = ad::matmul(windowed, tape.constant(forward_basis(params, false)));
  Var im = ad::matmul(windowed, tape.constant(forward_basis(params, true)));
  return SpectralVars{ad::reshape(re, Shape{batch, frames, bins}),
                      ad::reshape(im, Shape{batch, frames, bins}), frames, bins};
}

Var istft(const SpectralVars& frames, const WindowParams& params, const Var& window,
          std::size_t length) {
  params.validate();
  const Shape& shape = frames.re.value().shape();
  if (shape.size() != 3 || frames.im.value().shape() != shape) {
    throw DimensionError("istft expects matching [batch, frames, bins] re/im");
  }
  const std::size_t batch = shape[0];
  const std::size_t count = shape[1];
  const std::size_t bins = shape[2];
  if (bins > params.full_bins()) throw DimensionError("more bins than the window supports");
  if (length > count * params.hop) {
    throw ContractError("istft length " + std::to_string(length) + " exceeds " +
                        std::to_string(count) + " frames of hop " + std::to_string(params.hop));
  }
  const std::size_t tw = params.length;
  const std::size_t pad = count * params.hop - length;
  Tape& tape = frames.re.tape();

  Var re = ad::reshape(frames.re, Shape{batch * count, bins});
  Var im = ad::reshape(frames.im, Shape{batch * count, bins});
  Var segments = ad::add(ad::matmul(re, tape.constant(inverse_basis(params, bins, false))),
                         ad::matmul(im, tape.constant(inverse_basis(params, bins, true))));
  Var weighted = ad::reshape(ad::mul(segments, window), Shape{batch, count * tw});

  std::vector<std::int64_t> target(count * tw);
  std::vector<std::int64_t> tile(count * tw);
  for (std::size_t m = 0; m < count; ++m) {
    for (std::size_t t = 0; t < tw; ++t) {
      const std::size_t q = m * params.hop + t;
      target[m * tw + t] = (q >= pad && q - pad < length) ? static_cast<std::int64_t>(q - pad) : -1;
      tile[m * tw + t] = static_cast<std::int64_t>(t);
    }
  }
  Var numerator = ad::scatter_add_last(weighted, target, length);
  Var w2 = ad::reshape(ad::square(window), Shape{1, tw});
  Var coverage = ad::scatter_add_last(ad::gather_last(w2, std::move(tile)), target, length);
  for (std::size_t t = 0; t < length; ++t) {
    if (coverage.value()[t] < kCoverageFloor) {
      throw DomainError("reconstruction coverage below 1e-10 at sample " + std::to_string(t));
    }
  }
  return ad::div(numerator, coverage);
}

SpectralFrames stft(std::span<const double> x, const WindowParams& params) {
  Tape tape;
  Var xv = tape.constant(Tensor(Shape{1, x.size()}, std::vector<double>(x.begin(), x.end())));
  Var sigma = tape.constant(Tensor::scalar(params.sigma));
  SpectralVars out = stft(xv, params, window_var(params, sigma));
  SpectralFrames frames(out.frames, out.bins, params.length, params.hop);
  std::copy(out.re.value().values().begin(), out.re.value().values().end(), frames.re.begin());
  std::copy(out.im.value().values().begin(), out.im.value().values().end(), frames.im.begin());
  return frames;
}

std::vector<double> istft(const SpectralFrames& frames, const WindowParams& params,
                          std::size_t length) {
  Tape tape;
  const Shape shape{1, frames.num_frames, frames.num_bins};
  SpectralVars vars{tape.constant(Tensor(shape, frames.re)), tape.constant(Tensor(shape, frames.im)),
                    frames.num_frames, frames.num_bins};
  Var sigma = tape.constant(Tensor::scalar(params.sigma));
  Var out = istft(vars, params, window_var(params, sigma), length);
  return std::vector<double>(out.value().values().begin(), out.value().values().end());
}

SpectralFrames lowpass(const SpectralFrames& frames_full, std::size_t factor) {
  if (factor == 0) throw ContractError("low-pass factor must be >= 1");
  const std::size_t kept = (frames_full.num_bins + factor - 1) / factor;
  SpectralFrames out(frames_full.num_frames, kept, frames_full.window_length, frames_full.hop);
  for (std::size_t m = 0; m < frames_full.num_frames; ++m) {
    for (std::size_t k = 0; k < kept; ++k) out.set(m, k, frames_full.at(m, k));
  }
  return out;
}

std::vector<std::complex<double>> hermitian_extend(const SpectralFrames& frames) {
  const std::size_t tw = frames.window_length;
  std::vector<std::complex<double>> full(frames.num_frames * tw);
  for (std::size_t m = 0; m < frames.num_frames; ++m) {
    for (std::size_t k = 0; k < frames.num_bins && k <= tw / 2; ++k) {
      std::complex<double> d = frames.at(m, k);
      const bool self_conjugate = k == 0 || (tw % 2 == 0 && k == tw / 2);
      if (self_conjugate) d = {d.real(), 0.0};
      full[m * tw + k] = d;
      if (k != 0) full[m * tw + (tw - k)] = std::conj(d);
    }
  }
  return full;
}

}  // namespace recown
