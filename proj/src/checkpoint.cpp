#include "recown/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "recown/error.hpp"

namespace recown {

namespace {

constexpr std::array<char, 8> kMagic{'R', 'E', 'C', 'O', 'W', 'N', 'C', 'K'};

using json = nlohmann::json;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <class T>
  void le(T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void real(double x) { le(std::bit_cast<std::uint64_t>(x)); }
  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> buf) : buf_(std::move(buf)) {}
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw CorruptionError("checkpoint is truncated");
  }
  template <class T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  double real() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return buf_.size(); }
  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

struct Section {
  std::string name;
  std::vector<double> values;
};

json config_json(const ModelConfig& c) {
  const WindowParams& w = c.srnn.window;
  const StructureParams& s = c.cwspn.structure;
  return {{"seed", c.seed},
          {"window", {{"length", w.length},
                      {"hop", w.hop},
                      {"lowpass_factor", w.lowpass_factor},
                      {"kind", w.kind == WindowKind::gaussian ? "gaussian" : "rectangular"}}},
          {"srnn", {{"hidden", c.srnn.hidden}, {"context_len", c.srnn.context_len}, {"forecast_len", c.srnn.forecast_len}}},
          {"circuit", {{"depth", s.depth}, {"repetitions", s.repetitions}, {"sums", s.sums},
                       {"leaves", s.leaves}, {"seed", s.seed}}},
          {"conditioner", {{"hidden", c.cwspn.hidden}}}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  const json& w = j.at("window");
  c.srnn.window.length = w.at("length").get<std::size_t>();
  c.srnn.window.hop = w.at("hop").get<std::size_t>();
  c.srnn.window.lowpass_factor = w.at("lowpass_factor").get<std::size_t>();
  c.srnn.window.kind = w.at("kind").get<std::string>() == "gaussian" ? WindowKind::gaussian : WindowKind::rectangular;
  const json& r = j.at("srnn");
  c.srnn.hidden = r.at("hidden").get<std::size_t>();
  c.srnn.context_len = r.at("context_len").get<std::size_t>();
  c.srnn.forecast_len = r.at("forecast_len").get<std::size_t>();
  const json& s = j.at("circuit");
  c.cwspn.structure.depth = s.at("depth").get<std::size_t>();
  c.cwspn.structure.repetitions = s.at("repetitions").get<std::size_t>();
  c.cwspn.structure.sums = s.at("sums").get<std::size_t>();
  c.cwspn.structure.leaves = s.at("leaves").get<std::size_t>();
  c.cwspn.structure.seed = s.at("seed").get<std::uint64_t>();
  c.cwspn.hidden = j.at("conditioner").at("hidden").get<std::size_t>();
  return c;
}

std::vector<NamedTensor> all_tensors(Recown& m) {
  std::vector<NamedTensor> out = m.srnn.parameters();
  for (auto& p : m.cwspn.conditioner.parameters()) out.push_back(p);
  return out;
}

}  // namespace

void save_checkpoint(const Recown& model_in, std::ostream& out) {
  Recown& model = const_cast<Recown&>(model_in);  // parameters() hands out mutable views only
  std::vector<Section> sections;
  json shapes = json::object();
  for (const NamedTensor& t : all_tensors(model)) {
    sections.push_back({t.name, {t.tensor->values().begin(), t.tensor->values().end()}});
    shapes[t.name] = t.tensor->shape();
  }
  sections.push_back({"config.window_sigma", {model.config.srnn.window.sigma}});
  sections.push_back({"norm", {model.norm.mean, model.norm.std}});
  sections.push_back({"likelihood", {model.likelihood.ll_min, model.likelihood.ll_max,
                                     model.likelihood.valid ? 1.0 : 0.0}});
  json manifest = {{"format", "recown-checkpoint"},
                   {"version", kCheckpointVersion},
                   {"config", config_json(model.config)},
                   {"shapes", shapes},
                   {"circuit_params", model.cwspn.circuit().num_params()}};
  for (const auto& s : sections) manifest["sections"].push_back(s.name);
  const std::string text = manifest.dump();

  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.le<std::uint32_t>(kCheckpointVersion);
  w.le<std::uint64_t>(text.size());
  w.bytes(text.data(), text.size());
  for (const auto& s : sections) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(s.name.size()));
    w.bytes(s.name.data(), s.name.size());
    w.le<std::uint64_t>(s.values.size());
    for (double x : s.values) w.real(x);
  }
  const std::uint64_t sum = fnv1a(w.buffer().data(), w.buffer().size());
  w.le<std::uint64_t>(sum);
  out.write(reinterpret_cast<const char*>(w.buffer().data()), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw Error("failed writing checkpoint");
}

void save_checkpoint(const Recown& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  save_checkpoint(model, out);
}

namespace {

struct Parsed {
  json manifest;
  std::vector<Section> sections;
};

Parsed parse(std::istream& in) {
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(buf));
  if (r.size() < kMagic.size() || std::memcmp(r.buffer().data(), kMagic.data(), kMagic.size()) != 0) {
    throw CorruptionError("not a checkpoint file (bad magic)");
  }
  r.text(kMagic.size());
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  if (r.size() < 8 + r.pos()) throw CorruptionError("checkpoint is truncated");
  const std::size_t body_end = r.size() - 8;
  {
    Reader tail(std::vector<unsigned char>(r.buffer().begin() + static_cast<std::ptrdiff_t>(body_end), r.buffer().end()));
    if (tail.le<std::uint64_t>() != fnv1a(r.buffer().data(), body_end)) {
      throw CorruptionError("checkpoint checksum mismatch (file truncated or damaged)");
    }
  }
  Parsed p;
  const auto mlen = r.le<std::uint64_t>();
  if (mlen > body_end - r.pos()) throw CorruptionError("checkpoint manifest length out of range");
  try {
    p.manifest = json::parse(r.text(static_cast<std::size_t>(mlen)));
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("unreadable checkpoint manifest: ") + e.what());
  }
  while (r.pos() < body_end) {
    Section s;
    const auto nlen = r.le<std::uint32_t>();
    if (nlen > body_end - r.pos()) throw CorruptionError("section name out of range");
    s.name = r.text(nlen);
    const auto count = r.le<std::uint64_t>();
    if (count > (body_end - r.pos()) / 8) throw CorruptionError("section " + s.name + " out of range");
    s.values.resize(static_cast<std::size_t>(count));
    for (double& x : s.values) x = r.real();
    p.sections.push_back(std::move(s));
  }
  if (r.pos() != body_end) throw CorruptionError("trailing bytes in checkpoint");
  return p;
}

}  // namespace

Recown load_checkpoint(std::istream& in) {
  Parsed p = parse(in);
  try {
    auto find = [&](const std::string& name) -> const std::vector<double>& {
      for (const auto& s : p.sections) {
        if (s.name == name) return s.values;
      }
      throw CorruptionError("checkpoint lacks section " + name);
    };
    ModelConfig config = config_from_json(p.manifest.at("config"));
    const auto& sigma0 = find("config.window_sigma");
    if (sigma0.size() != 1) throw CorruptionError("bad window sigma section");
    config.srnn.window.sigma = sigma0[0];
    config.validate();

    Recown m;
    m.config = config;
    m.cwspn.config = config.cwspn;
    m.cwspn.structure = build_structure(config.num_vars(), config.cwspn.structure);
    if (m.cwspn.circuit().num_params() != p.manifest.at("circuit_params").get<std::size_t>()) {
      throw CorruptionError("rebuilt circuit does not match the stored parameter count");
    }
    const json& shapes = p.manifest.at("shapes");
    auto restore = [&](Tensor& t, const std::string& name) {
      const Shape shape = shapes.at(name).get<Shape>();
      const auto& values = find(name);
      if (values.size() != shape_size(shape)) throw CorruptionError("section " + name + " has the wrong size");
      t = Tensor(shape, values);
    };
    SrnnWeights& s = m.srnn;
    for (auto [t, name] : std::initializer_list<std::pair<Tensor*, const char*>>{
             {&s.w_update, "srnn.w_update"}, {&s.u_update, "srnn.u_update"}, {&s.b_update, "srnn.b_update"},
             {&s.w_reset, "srnn.w_reset"},   {&s.u_reset, "srnn.u_reset"},   {&s.b_reset, "srnn.b_reset"},
             {&s.w_cand, "srnn.w_cand"},     {&s.u_cand, "srnn.u_cand"},     {&s.b_cand, "srnn.b_cand"},
             {&s.w_out, "srnn.w_out"},       {&s.sigma, "srnn.sigma"}}) {
      restore(*t, name);
    }
    ConditionerWeights& c = m.cwspn.conditioner;
    for (auto [t, name] : std::initializer_list<std::pair<Tensor*, const char*>>{
             {&c.w1, "cond.w1"}, {&c.b1, "cond.b1"}, {&c.w2, "cond.w2"},
             {&c.b2, "cond.b2"}, {&c.w3, "cond.w3"}, {&c.b3, "cond.b3"}}) {
      restore(*t, name);
    }
    if (c.input_size() != config.conditioner_inputs() || c.output_size() != m.cwspn.circuit().num_params() ||
        s.w_update.dim(0) != config.srnn.input_size() || s.w_update.dim(1) != config.srnn.hidden) {
      throw CorruptionError("stored tensor shapes disagree with the stored configuration");
    }
    const auto& norm = find("norm");
    const auto& lik = find("likelihood");
    if (norm.size() != 2 || lik.size() != 3) throw CorruptionError("bad statistics sections");
    m.norm = NormStats{norm[0], norm[1]};
    m.likelihood = TrainLikelihoodStats{lik[0], lik[1], lik[2] != 0.0};
    return m;
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("malformed checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("checkpoint holds an invalid configuration: ") + e.what());
  } catch (const ContractError& e) {
    throw CorruptionError(std::string("checkpoint holds an invalid configuration: ") + e.what());
  }
}

Recown load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

std::string checkpoint_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  return parse(in).manifest.dump(2);
}

}  // namespace recown
