#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "recown/error.hpp"
#include "recown/ops.hpp"
#include "recown/training.hpp"

using namespace recown;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.srnn.hidden = 8;
  c.srnn.window.length = 8;
  c.srnn.window.hop = 4;
  c.srnn.window.lowpass_factor = 1;
  c.srnn.context_len = 32;
  c.srnn.forecast_len = 8;
  c.cwspn.structure = StructureParams{2, 2, 2, 2, 0};
  c.cwspn.hidden = 16;
  c.seed = 3;
  return c;
}

Dataset tiny_data(std::uint64_t seed, std::size_t train = 64) {
  SynthSizes s;
  s.train = train;
  s.validation = 16;
  s.test = 16;
  s.context_len = 32;
  s.forecast_len = 8;
  return synth_dataset(SynthKind::multi_sine, seed, s);
}

std::vector<double> flat(Recown& m) {
  std::vector<double> out;
  for (const auto& p : m.srnn.parameters()) out.insert(out.end(), p.tensor->values().begin(), p.tensor->values().end());
  return out;
}

std::vector<double> flat_conditioner(Recown& m) {
  std::vector<double> out;
  for (const auto& p : m.cwspn.conditioner.parameters()) {
    out.insert(out.end(), p.tensor->values().begin(), p.tensor->values().end());
  }
  return out;
}

Batch first_batch(const Dataset& d, std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  return make_batch(d.train, order, 0);
}

}  // namespace

TEST_CASE("mse loss") {
  const std::vector<double> a{1, 2, 3}, b{3, 4, 5};
  CHECK(mse_loss(a, a) == 0.0);
  CHECK(mse_loss(a, b) == 4.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> x(50), y(50);
  double want = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    x[i] = g(rng);
    y[i] = g(rng);
    want += (x[i] - y[i]) * (x[i] - y[i]);
  }
  CHECK(mse_loss(x, y) == doctest::Approx(want / 50.0));
  const std::vector<double> short_b{1, 2};
  CHECK_THROWS_AS(mse_loss(a, short_b), ContractError);
}

TEST_CASE("weighted nll loss") {
  const std::vector<double> l1{-2}, s1{1};
  CHECK(weighted_nll_loss(l1, s1, 1e-4) == doctest::Approx(2.0));
  const std::vector<double> l2{-2, -4}, s2{1, 2};
  CHECK(weighted_nll_loss(l2, s2, 1e-4) == doctest::Approx(1.5));
  // doubling one SE divides its contribution by four
  const std::vector<double> l3{-3}, s3{0.5}, s3d{1.0};
  CHECK(weighted_nll_loss(l3, s3d, 1e-4) == doctest::Approx(weighted_nll_loss(l3, s3, 1e-4) / 4.0));
  // floor guards near-perfect predictions
  const std::vector<double> s0{0.0};
  CHECK(weighted_nll_loss(l1, s0, 1e-2) == doctest::Approx(2.0 / 1e-4));
}

TEST_CASE("larger error weighs less for equal likelihood") {
  const std::vector<double> ll{-1.0, -1.0}, se{0.1, 0.4};
  const double both = weighted_nll_loss(ll, se, 1e-4);
  const std::vector<double> l0{-1.0}, e0{0.1}, e1{0.4};
  CHECK(weighted_nll_loss(l0, e1, 1e-4) < weighted_nll_loss(l0, e0, 1e-4));
  CHECK(both == doctest::Approx(0.5 * (weighted_nll_loss(l0, e0, 1e-4) + weighted_nll_loss(l0, e1, 1e-4))));
}

TEST_CASE("weighted nll gradient reaches the likelihoods only") {
  Tape tape;
  Var ll = tape.parameter(Tensor(Shape{2}, {-1.0, -3.0}));
  const std::vector<double> se{0.5, 2.0};
  const Gradients g = tape.backward(weighted_nll_loss(ll, se, 1e-4));
  CHECK(g.of(ll)[0] == doctest::Approx(-0.5 / 0.25));
  CHECK(g.of(ll)[1] == doctest::Approx(-0.5 / 4.0));
}

TEST_CASE("adam first step moves by the learning rate") {
  Tensor w(Shape{3}, {1.0, 2.0, 3.0});
  std::vector<NamedTensor> p{{"w", &w}};
  Adam opt(p, 0.01, 0.9, 0.999, 1e-8);
  const std::vector<Tensor> g{Tensor(Shape{3}, {0.5, -2.0, 0.0})};
  opt.step(p, g);
  CHECK(w[0] == doctest::Approx(0.99));
  CHECK(w[1] == doctest::Approx(2.01));
  CHECK(w[2] == 3.0);
}

TEST_CASE("global norm clipping") {
  std::vector<Tensor> g{Tensor(Shape{2}, {3.0, 0.0}), Tensor(Shape{1}, {4.0})};
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g[0][0] == doctest::Approx(0.6));
  CHECK(g[1][0] == doctest::Approx(0.8));
  std::vector<Tensor> small{Tensor(Shape{1}, {0.1})};
  clip_global_norm(small, 1.0);
  CHECK(small[0][0] == 0.1);
}

TEST_CASE("zero-gradient batch leaves the srnn unchanged") {
  ModelConfig mc = tiny_model();
  Recown m = Recown::create(mc);
  TrainConfig tc;
  TrainState st = TrainState::create(m, tc);
  Dataset d = tiny_data(1, 8);
  Batch b = first_batch(d, 8);
  b.targets.fill(0.0);  // the zero output projection predicts exactly zero
  const auto before = flat(m);
  const StepMetrics r = coordinate_step(m, st, b, tc);
  CHECK(r.mse == 0.0);
  CHECK(flat(m) == before);
}

TEST_CASE("srnn phase is a plain adam step on the mse gradient") {
  ModelConfig mc = tiny_model();
  Recown m = Recown::create(mc);
  Recown ref = m;
  for (double& v : m.srnn.w_out.values()) v = 0.05;
  for (double& v : ref.srnn.w_out.values()) v = 0.05;
  TrainConfig tc;
  TrainState st = TrainState::create(m, tc);
  Dataset d = tiny_data(2, 16);
  const Batch b = first_batch(d, 16);
  const auto cond_before = flat_conditioner(m);
  coordinate_step(m, st, b, tc);

  // SRNN update recomputed outside the coordinate step; the conditioner
  // phase must not have touched it.
  Tape tape;
  const auto params = ref.srnn.parameters();
  const auto v = bind_parameters(tape, params, true);
  SrnnVars sv{GruVars{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]}, v[9], v[10]};
  SrnnForward f = srnn_forward(sv, tape.constant(b.contexts), mc.srnn, mc.srnn.forecast_len);
  Var loss = ad::mean(ad::square(ad::sub(f.series, tape.constant(b.targets))));
  const Gradients g = tape.backward(loss);
  std::vector<Tensor> grads;
  for (const Var& x : v) grads.push_back(g.of(x));
  clip_global_norm(grads, tc.clip_norm);
  Adam opt(params, tc.lr_srnn, tc.beta1, tc.beta2, tc.eps);
  opt.step(params, grads);
  CHECK(flat(m) == flat(ref));
  CHECK(flat_conditioner(m) != cond_before);
}

TEST_CASE("one small step decreases the batch mse") {
  double decrease = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelConfig mc = tiny_model();
    mc.seed = seed;
    Recown m = Recown::create(mc);
    for (double& v : m.srnn.w_out.values()) v = 0.02;
    TrainConfig tc;
    tc.lr_srnn = 1e-4;
    TrainState st = TrainState::create(m, tc);
    Dataset d = tiny_data(seed, 16);
    const Batch b = first_batch(d, 16);
    const double before = coordinate_step(m, st, b, tc).mse;
    const double after = evaluate_mse(m, std::span<const WindowPair>(d.train).subspan(0, 16));
    decrease += before - after;
  }
  CHECK(decrease > 0.0);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  Recown m = Recown::create(tiny_model());
  m.srnn.w_out[0] = std::nan("");
  TrainConfig tc;
  TrainState st = TrainState::create(m, tc);
  Dataset d = tiny_data(1, 4);
  Batch b = first_batch(d, 4);
  b.id = 17;
  try {
    coordinate_step(m, st, b, tc);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    const std::string what = e.what();
    CHECK(what.find("batch 17") != std::string::npos);
    CHECK(what.find("srnn.w_out=") != std::string::npos);
  }
}

TEST_CASE("training is deterministic and improves validation mse") {
  const Dataset d = tiny_data(5);
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 16;
  tc.lr_srnn = 5e-3;
  std::ostringstream log_a, log_b;
  TrainResult a = train(d, tiny_model(), tc, &log_a);
  TrainResult b = train(d, tiny_model(), tc, &log_b);
  CHECK(log_a.str() == log_b.str());
  CHECK(flat(a.model) == flat(b.model));
  CHECK(a.epochs.size() == 5);
  CHECK(a.epochs[a.best_epoch].val_mse < a.epochs[0].val_mse);
  CHECK(a.model.likelihood.valid);
  CHECK(a.model.likelihood.ll_min <= a.model.likelihood.ll_max);
  CHECK(log_a.str().find("\"cwll\"") != std::string::npos);
}

TEST_CASE("zero epochs returns the initialized model") {
  const Dataset d = tiny_data(5, 16);
  TrainConfig tc;
  tc.epochs = 0;
  TrainResult r = train(d, tiny_model(), tc);
  Recown fresh = Recown::create(tiny_model());
  CHECK(flat(r.model) == flat(fresh));
  CHECK(flat_conditioner(r.model) == flat_conditioner(fresh));
}

TEST_CASE("training input validation") {
  Dataset empty;
  TrainConfig tc;
  CHECK_THROWS_AS(train(empty, tiny_model(), tc), InputError);
  tc.lr_srnn = 0.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.se_floor = -1.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
}
