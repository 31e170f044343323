#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "recown/error.hpp"
#include "recown/evaluation.hpp"

using namespace recown;

namespace {

std::vector<ForecastRecord> make(const std::vector<double>& se, const std::vector<double>& ll) {
  std::vector<ForecastRecord> r(se.size());
  for (std::size_t i = 0; i < se.size(); ++i) {
    r[i].id = i;
    r[i].se = se[i];
    r[i].cwll = ll[i];
  }
  return r;
}

}  // namespace

TEST_CASE("prediction score") {
  const auto r = make({0, 1, 4}, {0, 1, 2});
  const auto s = prediction_score(r);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(0.5));
  CHECK(s[2] == 1.0);
  CHECK_THROWS_AS(prediction_score(make({2, 2, 2}, {0, 1, 2})), DomainError);
  CHECK_THROWS_AS(prediction_score(make({2}, {1})), ContractError);
}

TEST_CASE("likelihood score") {
  const auto r = make({0, 1, 2}, {-1, -2, -5});
  const auto s = likelihood_score(r);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(0.5));
  CHECK(s[2] == 1.0);
  CHECK_THROWS_AS(likelihood_score(make({0, 1}, {3, 3})), DomainError);
}

TEST_CASE("correlation error") {
  auto aligned = make({0, 1, 4}, {0, -1, -4});
  CHECK(correlation_error(aligned) == doctest::Approx(0.0));
  for (const auto& r : aligned) CHECK(r.ce == doctest::Approx(0.0));
  auto opposite = make({0, 1}, {-1, 0});
  CHECK(correlation_error(opposite) == doctest::Approx(1.0));
  CHECK(opposite[1].s_pred == 1.0);
  CHECK(opposite[1].s_ll == 0.0);
  CHECK(opposite[1].ce == 1.0);
}

TEST_CASE("scores and CE stay in the unit interval") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> se(20), ll(20);
    for (auto& v : se) v = std::abs(u(rng));
    for (auto& v : ll) v = u(rng);
    auto r = make(se, ll);
    const double mean = correlation_error(r);
    CHECK(mean >= 0.0);
    CHECK(mean <= 1.0);
    for (const auto& x : r) {
      CHECK(x.s_pred >= 0.0);
      CHECK(x.s_pred <= 1.0);
      CHECK(x.s_ll >= 0.0);
      CHECK(x.s_ll <= 1.0);
      CHECK(x.ce <= 1.0);
    }
  }
}

TEST_CASE("increasing affine maps of the likelihood leave CE and selection unchanged") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> se(40), ll(40), ll2(40);
  for (std::size_t i = 0; i < 40; ++i) {
    se[i] = std::abs(g(rng));
    ll[i] = g(rng);
    ll2[i] = 3.5 * ll[i] - 12.0;
  }
  auto a = make(se, ll);
  auto b = make(se, ll2);
  CHECK(correlation_error(a) == doctest::Approx(correlation_error(b)).epsilon(1e-12));
  for (std::size_t i = 0; i < 40; ++i) CHECK(a[i].s_ll == doctest::Approx(b[i].s_ll));
  const auto ra = risk_selection(a, 0.1), rb = risk_selection(b, 0.1);
  CHECK(ra.captured == rb.captured);
}

TEST_CASE("random baseline closed form") {
  const std::vector<double> half(100, 0.5);
  CHECK(random_baseline_expectation(half) == doctest::Approx(1.0 / 12.0));
  const std::vector<double> zeros(10, 0.0);
  CHECK(random_baseline_expectation(zeros) == doctest::Approx(1.0 / 3.0));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> se(200), ll(200);
  for (auto& v : se) v = u(rng);
  for (auto& v : ll) v = u(rng);
  auto r = make(se, ll);
  const auto sp = prediction_score(r);
  const double expected = random_baseline_expectation(sp);
  // repeated draws average to the expectation
  double sum = 0.0, sq = 0.0;
  const int reps = 500;
  for (int i = 0; i < reps; ++i) {
    const double v = random_baseline(r, static_cast<std::uint64_t>(i));
    sum += v;
    sq += v * v;
  }
  const double mean = sum / reps;
  const double se_mean = std::sqrt((sq / reps - mean * mean) / reps);
  CHECK(std::abs(mean - expected) < 3.0 * se_mean);
  CHECK(random_baseline(r, 5) == random_baseline(r, 5));
}

TEST_CASE("risk selection under exact rank agreement") {
  std::vector<double> se(200), ll(200);
  for (std::size_t i = 0; i < 200; ++i) {
    se[i] = static_cast<double>(i);
    ll[i] = -static_cast<double>(i);
  }
  const auto r = make(se, ll);
  for (double q : {0.05, 0.1, 0.2, 0.5}) {
    const auto sel = risk_selection(r, q, 0.05);
    CHECK(sel.coverage == doctest::Approx(std::min(q / 0.05, 1.0)));
  }
  const auto small = risk_selection(r, 0.025, 0.05);
  CHECK(small.coverage == doctest::Approx(0.5));
  CHECK(risk_selection(r, 1.0).coverage == 1.0);
  CHECK_THROWS_AS(risk_selection(r, 0.0), ContractError);
  CHECK(risk_selection(r, 0.1).expected_random == doctest::Approx(0.1));
}

TEST_CASE("moving average") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const auto y = moving_average(x, 2);
  CHECK(y == std::vector<double>{1, 1.5, 2.5, 3.5, 4.5});
  CHECK(moving_average(x, 12).back() == doctest::Approx(3.0));
}

TEST_CASE("records file round trip") {
  auto r = make({0.5, 1.25, 3.0}, {-1.0, 2.5, -7.125});
  correlation_error(r);
  std::stringstream ss;
  write_records(ss, r);
  CHECK(ss.str().rfind("id,se,cwll,s_pred,s_ll,ce\n", 0) == 0);
  const auto back = read_records(ss);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == r[i].id);
    CHECK(back[i].se == r[i].se);
    CHECK(back[i].cwll == r[i].cwll);
    CHECK(back[i].ce == r[i].ce);
  }
  std::stringstream bad("id,se\n1,2\n");
  CHECK_THROWS_AS(read_records(bad), ParseError);
}
