#include <doctest.h>

#include <cmath>

#include "recown/error.hpp"
#include "recown/uncertainty.hpp"

using namespace recown;

namespace {

TrainLikelihoodStats stats(double lo, double hi) { return TrainLikelihoodStats{lo, hi, true}; }

}  // namespace

TEST_CASE("training likelihood statistics") {
  const std::vector<double> ll{-3.0, 2.0, -7.5, 0.0};
  const auto s = TrainLikelihoodStats::from(ll);
  CHECK(s.ll_min == -7.5);
  CHECK(s.ll_max == 2.0);
  CHECK(s.lr_max() == doctest::Approx(19.0));
  CHECK_THROWS_AS(TrainLikelihoodStats::from(std::vector<double>{}), InputError);
}

TEST_CASE("likelihood ratio") {
  const auto s = stats(-10.0, -1.0);
  CHECK(likelihood_ratio(-1.0, 1.0, s) == 0.0);
  CHECK(likelihood_ratio(-10.0, 1.0, s) == doctest::Approx(s.lr_max()));
  CHECK(likelihood_ratio(-4.0, 0.5, s) == doctest::Approx(2.0));
  // better than every training case clamps to zero
  CHECK(likelihood_ratio(5.0, 1.0, s) == 0.0);
  CHECK_THROWS_AS(likelihood_ratio(0.0, 1.0, TrainLikelihoodStats{}), ContractError);
}

TEST_CASE("llrs calibration points") {
  const auto s = stats(-10.0, -1.0);
  CHECK(llrs(-10.0, 1.0, s) == doctest::Approx(1.0));
  CHECK(llrs(-1.0, 1.0, s) == 0.0);
  // lambda = lr_max / 4
  const double ll = -1.0 - s.lr_max() / 8.0;
  CHECK(llrs(ll, 1.0, s) == doctest::Approx(0.5));
  CHECK(llrs(-20.0, 1.0, s) > 1.0);
  CHECK_THROWS_AS(llrs(-1.0, 1.0, stats(2.0, 2.0)), DomainError);
}

TEST_CASE("llrs decreases strictly with the local likelihood") {
  const auto s = stats(-30.0, 4.0);
  double prev = llrs(-50.0, 0.8, s);
  for (double ll = -49.0; ll < 4.0; ll += 1.0) {
    const double cur = llrs(ll, 0.8, s);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("llrs curve reduces to the single-window formula") {
  const auto s = stats(-10.0, -1.0);
  const std::vector<double> w{0.25, 0.5, 1.0, 0.5};
  const std::vector<double> one{-6.0};
  const auto c = llrs_curve(one, w, 2, 4, s);
  for (std::size_t n = 0; n < 4; ++n) CHECK(c[n] == doctest::Approx(llrs(-6.0, w[n], s)));
  // overlapping windows: w-weighted average of the two ratios
  const std::vector<double> two{-6.0, -2.0};
  const auto c2 = llrs_curve(two, w, 2, 4, s);
  const double num = w[2] * likelihood_ratio(-6.0, w[2], s) + w[0] * likelihood_ratio(-2.0, w[0], s);
  CHECK(c2[2] == doctest::Approx(std::sqrt(num / (w[2] + w[0]) / s.lr_max())));
  CHECK_THROWS_AS(llrs_curve(one, w, 2, 8, s), DomainError);
}

TEST_CASE("uncertainty band") {
  const std::vector<double> pred{1.0, -2.0, 0.5};
  const std::vector<double> zero(3, 0.0), ones(3, 1.0);
  const auto flat = uncertainty_band(pred, zero);
  CHECK(flat.lower == pred);
  CHECK(flat.upper == pred);
  const auto wide = uncertainty_band(pred, ones, 1.5);
  for (std::size_t i = 0; i < 3; ++i) CHECK(wide.upper[i] - wide.lower[i] == doctest::Approx(3.0));
  CHECK_THROWS_AS(uncertainty_band(pred, std::vector<double>(2, 0.0)), DimensionError);
}
