#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "recown/checkpoint.hpp"
#include "recown/error.hpp"
#include "recown/training.hpp"
#include "tempdir.hpp"

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
  c.seed = 5;
  return c;
}

struct Trained {
  Dataset data;
  Recown model;
};

Trained trained() {
  SynthSizes s;
  s.train = 48;
  s.validation = 8;
  s.test = 12;
  s.context_len = 32;
  s.forecast_len = 8;
  Dataset d = synth_dataset(SynthKind::multi_sine, 9, s);
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 16;
  auto r = train(d, tiny_model(), t, nullptr);
  return {std::move(d), std::move(r.model)};
}

std::string bytes_of(const Recown& m) {
  std::ostringstream os(std::ios::binary);
  save_checkpoint(m, os);
  return os.str();
}

Recown load_bytes(const std::string& b) {
  std::istringstream is(b, std::ios::binary);
  return load_checkpoint(is);
}

std::vector<std::vector<double>> contexts(const Dataset& d) {
  std::vector<std::vector<double>> out;
  for (const auto& p : d.test) out.push_back(p.context);
  return out;
}

}  // namespace

TEST_CASE("round trip reproduces forecasts and likelihoods bitwise") {
  auto [data, model] = trained();
  Recown back = load_bytes(bytes_of(model));
  CHECK(back.norm.mean == model.norm.mean);
  CHECK(back.norm.std == model.norm.std);
  CHECK(back.likelihood.ll_min == model.likelihood.ll_min);
  CHECK(back.likelihood.ll_max == model.likelihood.ll_max);
  CHECK(back.window().sigma == model.window().sigma);

  const auto ctx = contexts(data);
  const auto a = predict(model, ctx);
  const auto b = predict(back, ctx);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::memcmp(a[i].series.data(), b[i].series.data(), a[i].series.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(&a[i].cwll, &b[i].cwll, sizeof(double)) == 0);
  }
  const auto fa = forecast_with_uncertainty(model, ctx[0], 16);
  const auto fb = forecast_with_uncertainty(back, ctx[0], 16);
  CHECK(fa.series == fb.series);
  CHECK(fa.llrs == fb.llrs);

  // saving the loaded model gives the same bytes
  CHECK(bytes_of(back) == bytes_of(model));
}

TEST_CASE("damaged files are rejected") {
  auto [data, model] = trained();
  const std::string good = bytes_of(model);

  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, good.size() / 2, good.size() - 1}) {
    CHECK_THROWS_AS(load_bytes(good.substr(0, cut)), CorruptionError);
  }
  std::string flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(load_bytes(flipped), CorruptionError);

  std::string magic = good;
  magic[0] = 'X';
  CHECK_THROWS_AS(load_bytes(magic), CorruptionError);
}

TEST_CASE("other format versions raise a version error") {
  auto [data, model] = trained();
  std::string b = bytes_of(model);
  const std::uint32_t v = kCheckpointVersion + 1;
  std::memcpy(b.data() + 8, &v, sizeof v);
  CHECK_THROWS_AS(load_bytes(b), VersionError);
}

TEST_CASE("file overloads and manifest") {
  auto [data, model] = trained();
  testing::TempDir dir("ckpt");
  save_checkpoint(model, dir / "m.ckpt");
  Recown back = load_checkpoint(dir / "m.ckpt");
  CHECK(bytes_of(back) == bytes_of(model));
  const auto j = nlohmann::json::parse(checkpoint_manifest(dir / "m.ckpt"));
  CHECK(j.at("version").get<int>() == static_cast<int>(kCheckpointVersion));
  CHECK(j.contains("shapes"));
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), Error);
}
