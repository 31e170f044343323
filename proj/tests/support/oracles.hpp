#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "recown/spectral.hpp"

namespace recown::testing {

// Direct O(T_w^2) windowed DFT with the same padding convention as stft:
// left edge replication to a multiple of the hop, zeros past the end.
inline std::vector<std::complex<double>> naive_stft(std::span<const double> x, const WindowParams& p) {
  const std::size_t frames = (x.size() + p.hop - 1) / p.hop;
  const std::size_t pad = frames * p.hop - x.size();
  const std::size_t bins = p.kept_bins();
  std::vector<std::complex<double>> out(frames * bins);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t n = 0; n < p.length; ++n) {
        const std::size_t q = m * p.hop + n;
        double v = 0.0;
        if (q < pad) v = x[0];
        else if (q - pad < x.size()) v = x[q - pad];
        const double w = gaussian_window(p, n);
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * n) / static_cast<double>(p.length);
        acc += w * v * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      out[m * bins + k] = acc;
    }
  }
  return out;
}

inline std::vector<double> random_series(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

// Average-rank Spearman correlation.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j);
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace recown::testing
