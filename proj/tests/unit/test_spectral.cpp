#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "recown/error.hpp"
#include "recown/ops.hpp"
#include "recown/spectral.hpp"

using namespace recown;

TEST_CASE("gaussian window shape") {
  WindowParams p;
  p.length = 16;
  p.sigma = 0.5;
  CHECK(gaussian_window(p, 8) == 1.0);
  CHECK(gaussian_window(p, 4) == doctest::Approx(std::exp(-0.5)));
  CHECK(gaussian_window(p, 0) == doctest::Approx(std::exp(-2.0)));
  for (std::size_t n = 1; n < 16; ++n) CHECK(gaussian_window(p, n) == doctest::Approx(gaussian_window(p, 16 - n)));
  p.kind = WindowKind::rectangular;
  CHECK(gaussian_window(p, 0) == 1.0);
}

TEST_CASE("bin counts") {
  WindowParams p;
  p.length = 16;
  CHECK(p.full_bins() == 9);
  p.lowpass_factor = 2;
  CHECK(p.kept_bins() == 5);
  p.length = 96;
  p.lowpass_factor = 1;
  CHECK(p.full_bins() == 49);
  CHECK(frame_count(96, 8) == 12);
  CHECK(frame_count(97, 8) == 13);
}

TEST_CASE("parameter validation") {
  WindowParams p;
  p.hop = 0;
  CHECK_THROWS_AS(p.validate(), ContractError);
  p.hop = 20;
  CHECK_THROWS_AS(p.validate(), ContractError);
  p = WindowParams{};
  p.sigma = 0.0;
  CHECK_THROWS_AS(p.validate(), ContractError);
  p = WindowParams{};
  std::vector<double> x(10, 1.0);
  CHECK_THROWS_AS(stft(x, p), InputError);
}

TEST_CASE("stft matches the naive windowed DFT") {
  std::mt19937_64 rng(11);
  for (std::size_t lp : {1u, 2u}) {
    WindowParams p;
    p.length = 16;
    p.hop = 8;
    p.sigma = 0.7;
    p.lowpass_factor = lp;
    for (std::size_t len : {16u, 45u, 64u}) {
      const auto x = testing::random_series(len, rng);
      const SpectralFrames f = stft(x, p);
      const auto ref = testing::naive_stft(x, p);
      REQUIRE(f.num_frames * f.num_bins == ref.size());
      double err = 0.0;
      for (std::size_t m = 0; m < f.num_frames; ++m) {
        for (std::size_t k = 0; k < f.num_bins; ++k) err = std::max(err, std::abs(f.at(m, k) - ref[m * f.num_bins + k]));
      }
      CHECK(err < 1e-9);
    }
  }
}

TEST_CASE("rectangular window gives the plain DFT of a tone") {
  WindowParams p;
  p.length = 8;
  p.hop = 8;
  p.kind = WindowKind::rectangular;
  std::vector<double> x(8);
  for (std::size_t n = 0; n < 8; ++n) x[n] = std::cos(2.0 * std::numbers::pi * 2.0 * static_cast<double>(n) / 8.0);
  const SpectralFrames f = stft(x, p);
  CHECK(f.num_frames == 1);
  CHECK(std::abs(f.at(0, 2) - std::complex<double>(4.0, 0.0)) < 1e-12);
  CHECK(std::abs(f.at(0, 1)) < 1e-12);
  CHECK(std::abs(f.at(0, 0)) < 1e-12);
}

TEST_CASE("round trip without low-pass reconstructs the series") {
  std::mt19937_64 rng(5);
  for (double sigma : {0.3, 0.5, 1.0}) {
    WindowParams p;
    p.sigma = sigma;
    for (std::size_t len : {64u, 77u, 256u}) {
      const auto x = testing::random_series(len, rng);
      const auto y = istft(stft(x, p), p, len);
      REQUIRE(y.size() == len);
      double err = 0.0;
      for (std::size_t i = 0; i < len; ++i) err = std::max(err, std::abs(x[i] - y[i]));
      CHECK(err < 1e-9);
    }
  }
}

TEST_CASE("Parseval per frame with a rectangular window") {
  std::mt19937_64 rng(8);
  WindowParams p;
  p.length = 16;
  p.hop = 16;
  p.kind = WindowKind::rectangular;
  const auto x = testing::random_series(64, rng);
  const SpectralFrames f = stft(x, p);
  const auto full = hermitian_extend(f);
  for (std::size_t m = 0; m < f.num_frames; ++m) {
    double time = 0.0, freq = 0.0;
    for (std::size_t n = 0; n < 16; ++n) time += x[m * 16 + n] * x[m * 16 + n];
    for (std::size_t k = 0; k < 16; ++k) freq += std::norm(full[m * 16 + k]);
    CHECK(freq / 16.0 == doctest::Approx(time).epsilon(1e-12));
  }
}

TEST_CASE("low-pass keeps the lowest bins and zeroes the rest on inversion") {
  std::mt19937_64 rng(2);
  WindowParams full;
  WindowParams lp = full;
  lp.lowpass_factor = 2;
  const auto x = testing::random_series(64, rng);
  const SpectralFrames a = lowpass(stft(x, full), 2);
  const SpectralFrames b = stft(x, lp);
  REQUIRE(a.num_bins == b.num_bins);
  for (std::size_t i = 0; i < a.re.size(); ++i) {
    CHECK(a.re[i] == doctest::Approx(b.re[i]));
    CHECK(a.im[i] == doctest::Approx(b.im[i]));
  }
  // A tone in a dropped bin vanishes after low-pass round trip.
  std::vector<double> tone(64);
  for (std::size_t n = 0; n < 64; ++n) tone[n] = std::cos(2.0 * std::numbers::pi * 7.0 * static_cast<double>(n) / 16.0);
  const auto y = istft(stft(tone, lp), lp, 64);
  double energy = 0.0;
  for (std::size_t n = 16; n < 48; ++n) energy += y[n] * y[n];
  CHECK(energy < 1e-3 * 32);
}

TEST_CASE("hermitian extension mirrors conjugates") {
  SpectralFrames f(1, 3, 4, 2);
  f.set(0, 0, {1.0, 5.0});
  f.set(0, 1, {2.0, 3.0});
  f.set(0, 2, {4.0, 9.0});
  const auto full = hermitian_extend(f);
  CHECK(full[0] == std::complex<double>(1.0, 0.0));
  CHECK(full[1] == std::complex<double>(2.0, 3.0));
  CHECK(full[3] == std::complex<double>(2.0, -3.0));
  CHECK(full[2] == std::complex<double>(4.0, 0.0));
}

TEST_CASE("istft rejects lengths beyond the frames") {
  WindowParams p;
  SpectralFrames f(2, p.kept_bins(), p.length, p.hop);
  CHECK_THROWS_AS(istft(f, p, 17), ContractError);
}

TEST_CASE("stft and istft gradients wrt input, frames and sigma") {
  std::mt19937_64 rng(4);
  WindowParams p;
  p.length = 8;
  p.hop = 4;
  p.lowpass_factor = 2;
  Tensor x(Shape{2, 20});
  for (double& v : x.values()) v = std::normal_distribution<double>(0, 1)(rng);
  Tensor sigma(Shape{1}, 0.6);
  std::vector<NamedTensor> params{{"x", &x}, {"sigma", &sigma}};
  const auto r = testing::check_gradients(params, [&](Tape& tape, const std::vector<Var>& v) {
    Var w = window_var(p, v[1]);
    SpectralVars f = stft(v[0], p, w);
    Var y = istft(f, p, w, 20);
    Tensor probe(Shape{2, 20});
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = std::sin(0.3 * static_cast<double>(i));
    return ad::add(ad::sum(ad::mul(y, tape.constant(probe))), ad::sum(ad::square(f.im)));
  });
  CAPTURE(r.worst);
  CHECK(r.max_rel < 1e-5);
}
