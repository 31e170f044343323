#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "recown/error.hpp"
#include "recown/ops.hpp"

using namespace recown;
using recown::testing::check_gradients;

namespace {

Tensor randn(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Weighted sum so every output element gets a distinct upstream gradient.
Var probe(Tape& tape, const Var& y) {
  Tensor w(y.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
  return ad::sum(ad::mul(y, tape.constant(std::move(w))));
}

}  // namespace

TEST_CASE("tensor construction and shape checks") {
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.at(1, 2) == 1.5);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK(Tensor::scalar(3.0).item() == 3.0);
  CHECK_THROWS_AS(t.item(), DimensionError);
  CHECK(t.reshaped(Shape{3, 2}).dim(0) == 3);
  CHECK_THROWS_AS(t.reshaped(Shape{4}), DimensionError);
}

TEST_CASE("broadcast add matches hand-computed values") {
  Tape tape;
  Var a = tape.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var b = tape.constant(Tensor(Shape{1, 3}, {10, 20, 30}));
  Var c = ad::add(a, b);
  const std::vector<double> want{11, 22, 33, 14, 25, 36};
  for (std::size_t i = 0; i < 6; ++i) CHECK(c.value()[i] == want[i]);
  Var col = tape.constant(Tensor(Shape{2, 1}, {100, 200}));
  Var d = ad::add(a, col);
  CHECK(d.value().at(1, 0) == 204);
  CHECK_THROWS_AS(ad::add(a, tape.constant(Tensor(Shape{2}, 0.0))), DimensionError);
}

TEST_CASE("matmul forward") {
  Tape tape;
  Var a = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var b = tape.constant(Tensor::matrix(2, 1, {5, 6}));
  Var c = ad::matmul(a, b);
  CHECK(c.value()[0] == 17);
  CHECK(c.value()[1] == 39);
  CHECK_THROWS_AS(ad::matmul(b, b), DimensionError);
}

TEST_CASE("finite-difference gradients of elementwise and linear ops") {
  std::mt19937_64 rng(3);
  Tensor a = randn({3, 4}, rng);
  Tensor b = randn({4, 2}, rng);
  Tensor c = randn({1, 4}, rng);
  Tensor pos = randn({3, 4}, rng, 0.5, 2.0);
  std::vector<NamedTensor> params{{"a", &a}, {"b", &b}, {"c", &c}, {"pos", &pos}};

  struct Case {
    const char* name;
    testing::LossBuilder f;
  };
  const std::vector<Case> cases{
      {"matmul", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::matmul(v[0], v[1])); }},
      {"add", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::add(v[0], v[2])); }},
      {"sub", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::sub(v[2], v[0])); }},
      {"mul", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::mul(v[0], v[2])); }},
      {"div", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::div(v[0], v[3])); }},
      {"neg", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::neg(v[0])); }},
      {"exp", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::exp(v[0])); }},
      {"log", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::log(v[3])); }},
      {"tanh", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::tanh(v[0])); }},
      {"sigmoid", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::sigmoid(v[0])); }},
      {"sqrt", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::sqrt(v[3])); }},
      {"square", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::square(v[0])); }},
      {"softplus", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::softplus(v[0])); }},
      {"scale", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::add_scalar(ad::scale(v[0], -2.5), 1.0)); }},
      {"sum axis", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::sum(v[0], 1)); }},
      {"mean axis", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::mean(v[0], 0)); }},
      {"max axis", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::max(v[0], 1)); }},
      {"min", [](Tape&, const std::vector<Var>& v) { return ad::min(v[0]); }},
      {"reshape", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::reshape(v[0], Shape{2, 6})); }},
      {"slice", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::slice(v[0], 1, 1, 3)); }},
      {"concat", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::concat({v[0], v[2]}, 0)); }},
      {"gather", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::gather_last(v[0], {3, -1, 0, 0, 2})); }},
      {"scatter", [](Tape& t, const std::vector<Var>& v) { return probe(t, ad::scatter_add_last(v[0], {1, 1, -1, 0}, 3)); }},
  };
  for (const Case& c : cases) {
    CAPTURE(c.name);
    const auto r = check_gradients(params, c.f);
    CAPTURE(r.worst);
    CHECK(r.max_rel < 1e-6);
  }
}

TEST_CASE("fan-out accumulates gradients") {
  Tape tape;
  Var x = tape.parameter(Tensor::scalar(3.0));
  Var y = ad::add(ad::mul(x, x), x);  // x^2 + x
  const Gradients g = tape.backward(y);
  CHECK(g.of(x).item() == doctest::Approx(7.0));
}

TEST_CASE("unreachable parameter gets a zero gradient") {
  Tape tape;
  Var x = tape.parameter(Tensor::scalar(1.0));
  Var unused = tape.parameter(Tensor(Shape{3}, 2.0));
  const Gradients g = tape.backward(ad::square(x));
  CHECK(g.of(unused).squared_norm() == 0.0);
}

TEST_CASE("domain and contract errors") {
  Tape tape;
  Var z = tape.constant(Tensor(Shape{2}, {1.0, 0.0}));
  CHECK_THROWS_AS(ad::log(z), DomainError);
  CHECK_THROWS_AS(ad::sqrt(z), DomainError);
  CHECK_THROWS_AS(ad::div(z, z), DomainError);
  Var p = tape.parameter(Tensor(Shape{2}, 1.0));
  CHECK_THROWS_AS(tape.backward(p), ContractError);
  Var inf = ad::scale(ad::sum(p), std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(tape.backward(inf), DomainError);
}

TEST_CASE("backward clears the tape and invalidates variables") {
  Tape tape;
  Var x = tape.parameter(Tensor::scalar(2.0));
  Var y = ad::square(x);
  tape.backward(y);
  CHECK(tape.node_count() == 0);
  CHECK_FALSE(x.valid());
  CHECK_THROWS_AS(ad::square(x), ContractError);
}

TEST_CASE("variables from another tape are rejected") {
  Tape a, b;
  Var x = a.constant(Tensor::scalar(1.0));
  Var y = b.constant(Tensor::scalar(1.0));
  CHECK_THROWS_AS(ad::add(x, y), ContractError);
}
