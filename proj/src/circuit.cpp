#include "recown/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "recown/error.hpp"

namespace recown {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct LeafGradient {
  double logp;
  double mu_re, mu_im, s11, s12, s22;  // d logp / d decoded slot
  double x_re, x_im;                   // d logp / d value
};

LeafGradient leaf_gradient(const double* p, double re, double im) {
  const double d1 = re - p[0];
  const double d2 = im - p[1];
  const double s11 = p[2], s12 = p[3], s22 = p[4];
  const double det = s11 * s22 - s12 * s12;
  const double quad = (s22 * d1 * d1 - 2.0 * s12 * d1 * d2 + s11 * d2 * d2) / det;
  LeafGradient g{};
  g.logp = -kLog2Pi - 0.5 * std::log(det) - 0.5 * quad;
  // Sigma^{-1} d
  const double a1 = (s22 * d1 - s12 * d2) / det;
  const double a2 = (s11 * d2 - s12 * d1) / det;
  g.mu_re = a1;
  g.mu_im = a2;
  g.x_re = -a1;
  g.x_im = -a2;
  g.s11 = -0.5 * (s22 + d2 * d2 - quad * s22) / det;
  g.s22 = -0.5 * (s11 + d1 * d1 - quad * s11) / det;
  g.s12 = -0.5 * (-2.0 * s12 - 2.0 * d1 * d2 + 2.0 * quad * s12) / det;
  return g;
}

double leaf_value(const double* p, double re, double im) {
  const double d1 = re - p[0];
  const double d2 = im - p[1];
  const double det = p[2] * p[4] - p[3] * p[3];
  const double quad = (p[4] * d1 * d1 - 2.0 * p[3] * d1 * d2 + p[2] * d2 * d2) / det;
  return -kLog2Pi - 0.5 * std::log(det) - 0.5 * quad;
}

bool observed_atom(const std::uint8_t* observed, std::uint32_t atom) {
  return observed == nullptr || observed[atom] != 0;
}

void forward_nodes(const Circuit& c, const double* decoded, const double* values,
                   const std::uint8_t* observed, double* out) {
  const auto& nodes = c.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const CircuitNode& n = nodes[i];
    switch (n.kind) {
      case NodeKind::leaf:
        out[i] = observed_atom(observed, n.atom)
                     ? leaf_value(decoded + n.param_offset, values[2 * n.atom], values[2 * n.atom + 1])
                     : 0.0;
        break;
      case NodeKind::product: {
        double s = 0.0;
        for (std::uint32_t ch : n.children) s += out[ch];
        out[i] = s;
        break;
      }
      case NodeKind::sum: {
        const double* lw = decoded + n.param_offset;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n.children.size(); ++j) best = std::max(best, lw[j] + out[n.children[j]]);
        double acc = 0.0;
        for (std::size_t j = 0; j < n.children.size(); ++j) acc += std::exp(lw[j] + out[n.children[j]] - best);
        out[i] = best + std::log(acc);
        break;
      }
    }
  }
}

// Accumulates seed * d(root)/d(decoded) and d(root)/d(values).
void backward_nodes(const Circuit& c, const double* decoded, const double* values,
                    const std::uint8_t* observed, const double* node_values, double seed,
                    double* d_decoded, double* d_values, std::vector<double>& adj) {
  const auto& nodes = c.nodes();
  adj.assign(nodes.size(), 0.0);
  adj.back() = seed;
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const double a = adj[i];
    if (a == 0.0) continue;
    const CircuitNode& n = nodes[i];
    switch (n.kind) {
      case NodeKind::leaf: {
        if (!observed_atom(observed, n.atom)) break;
        const LeafGradient g =
            leaf_gradient(decoded + n.param_offset, values[2 * n.atom], values[2 * n.atom + 1]);
        double* dp = d_decoded + n.param_offset;
        dp[0] += a * g.mu_re;
        dp[1] += a * g.mu_im;
        dp[2] += a * g.s11;
        dp[3] += a * g.s12;
        dp[4] += a * g.s22;
        if (d_values) {
          d_values[2 * n.atom] += a * g.x_re;
          d_values[2 * n.atom + 1] += a * g.x_im;
        }
        break;
      }
      case NodeKind::product:
        for (std::uint32_t ch : n.children) adj[ch] += a;
        break;
      case NodeKind::sum: {
        const double* lw = decoded + n.param_offset;
        for (std::size_t j = 0; j < n.children.size(); ++j) {
          const double r = std::exp(lw[j] + node_values[n.children[j]] - node_values[i]);
          adj[n.children[j]] += a * r;
          d_decoded[n.param_offset + j] += a * r;
        }
        break;
      }
    }
  }
}

void decode_into(const Circuit& c, const double* raw, double* decoded) {
  for (const CircuitNode& n : c.nodes()) {
    if (n.kind == NodeKind::sum) {
      const double* z = raw + n.param_offset;
      double* lw = decoded + n.param_offset;
      const std::size_t k = n.children.size();
      const double best = *std::max_element(z, z + k);
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += std::exp(z[j] - best);
      const double lse = best + std::log(acc);
      for (std::size_t j = 0; j < k; ++j) lw[j] = z[j] - lse;
    } else if (n.kind == NodeKind::leaf) {
      const LeafGaussian g = leaf_from_raw(std::span<const double>(raw + n.param_offset, kLeafSlots));
      double* p = decoded + n.param_offset;
      p[0] = g.mu_re;
      p[1] = g.mu_im;
      p[2] = g.s11;
      p[3] = g.s12;
      p[4] = g.s22;
    }
  }
}

void decode_backward(const Circuit& c, const double* raw, const double* decoded,
                     const double* d_decoded, double* d_raw) {
  for (const CircuitNode& n : c.nodes()) {
    if (n.kind == NodeKind::sum) {
      const std::size_t k = n.children.size();
      const double* lw = decoded + n.param_offset;
      const double* g = d_decoded + n.param_offset;
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) total += g[j];
      for (std::size_t j = 0; j < k; ++j) d_raw[n.param_offset + j] += g[j] - std::exp(lw[j]) * total;
    } else if (n.kind == NodeKind::leaf) {
      const double* r = raw + n.param_offset;
      const double* g = d_decoded + n.param_offset;
      double* out = d_raw + n.param_offset;
      const double l11 = softplus(r[2]);
      const double l21 = r[3];
      const double l22 = softplus(r[4]);
      out[0] += g[0];
      out[1] += g[1];
      out[2] += (2.0 * l11 * g[2] + l21 * g[3]) * sigmoid(r[2]);
      out[3] += l11 * g[3] + 2.0 * l21 * g[4];
      out[4] += 2.0 * l22 * g[4] * sigmoid(r[4]);
    }
  }
}

using Bits = std::vector<std::uint64_t>;

Bits atom_bits(std::size_t num_vars) { return Bits((num_vars + 63) / 64, 0); }

}  // namespace

Circuit::Circuit(std::size_t num_vars, std::vector<CircuitNode> nodes)
    : num_vars_(num_vars), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ContractError("circuit without nodes");
  std::size_t next = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    CircuitNode& n = nodes_[i];
    for (std::uint32_t ch : n.children) {
      if (ch >= i) throw ContractError("circuit nodes are not topologically ordered");
    }
    switch (n.kind) {
      case NodeKind::leaf:
        if (n.atom >= num_vars_) throw ContractError("leaf atom out of range");
        n.param_offset = next;
        next += kLeafSlots;
        ++num_leaves_;
        break;
      case NodeKind::sum:
        if (n.children.empty()) throw ContractError("sum node without children");
        n.param_offset = next;
        next += n.children.size();
        ++num_sums_;
        break;
      case NodeKind::product:
        if (n.children.empty()) throw ContractError("product node without children");
        break;
    }
  }
  num_params_ = next;
}

Structure build_structure(std::size_t num_vars, const StructureParams& params) {
  if (num_vars < 2) throw ContractError("a circuit needs at least two variables");
  if (params.depth < 1) throw ContractError("structure depth must be >= 1");
  if (params.repetitions < 1 || params.sums < 1 || params.leaves < 1) {
    throw ContractError("repetitions, sums and leaves must be >= 1");
  }
  Structure out;
  RegionGraph& g = out.graph;
  g.params = params;
  g.num_vars = num_vars;
  std::size_t max_depth = 0;
  while ((std::size_t{2} << max_depth) <= num_vars) ++max_depth;
  g.effective_depth = params.depth;
  if (params.depth > max_depth) {
    g.effective_depth = max_depth;
    g.depth_clamped = true;
    std::cerr << "warning: structure depth " << params.depth << " needs at least "
              << (std::size_t{1} << params.depth) << " variables; clamped to " << max_depth
              << " for " << num_vars << " variables\n";
  }

  std::mt19937_64 rng(params.seed);
  Region root;
  root.scope.resize(num_vars);
  std::iota(root.scope.begin(), root.scope.end(), 0u);
  root.leaf = false;
  g.regions.push_back(root);

  // Recursive balanced splitting of a shuffled scope.
  auto split = [&](auto&& self, std::uint32_t parent, std::vector<std::uint32_t> atoms,
                   std::size_t depth, std::size_t rep) -> void {
    const std::size_t half = atoms.size() / 2;
    std::vector<std::uint32_t> left(atoms.begin(), atoms.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<std::uint32_t> right(atoms.begin() + static_cast<std::ptrdiff_t>(half), atoms.end());
    const bool leaf = depth + 1 >= g.effective_depth;
    auto make = [&](std::vector<std::uint32_t> scope) {
      Region r;
      r.scope = scope;
      std::sort(r.scope.begin(), r.scope.end());
      r.depth = depth + 1;
      r.leaf = leaf;
      g.regions.push_back(std::move(r));
      return static_cast<std::uint32_t>(g.regions.size() - 1);
    };
    const std::uint32_t l = make(left);
    const std::uint32_t r = make(right);
    g.partitions.push_back(Partition{parent, l, r, rep});
    if (!leaf) {
      self(self, l, std::move(left), depth + 1, rep);
      self(self, r, std::move(right), depth + 1, rep);
    }
  };
  for (std::size_t rep = 0; rep < params.repetitions; ++rep) {
    std::vector<std::uint32_t> perm = g.regions[0].scope;
    std::shuffle(perm.begin(), perm.end(), rng);
    split(split, 0, std::move(perm), 0, rep);
  }

  // Emit circuit nodes region by region, children before parents.
  std::vector<CircuitNode> nodes;
  auto add = [&](CircuitNode n) {
    nodes.push_back(std::move(n));
    return static_cast<std::uint32_t>(nodes.size() - 1);
  };
  std::vector<std::vector<std::uint32_t>> partitions_of(g.regions.size());
  for (std::size_t p = 0; p < g.partitions.size(); ++p) partitions_of[g.partitions[p].parent].push_back(static_cast<std::uint32_t>(p));

  auto emit = [&](auto&& self, std::uint32_t region) -> std::vector<std::uint32_t> {
    const Region& reg = g.regions[region];
    std::vector<std::uint32_t> outputs;
    if (reg.leaf) {
      for (std::size_t l = 0; l < params.leaves; ++l) {
        std::vector<std::uint32_t> leaves;
        for (std::uint32_t atom : reg.scope) {
          CircuitNode leaf;
          leaf.kind = NodeKind::leaf;
          leaf.atom = atom;
          leaves.push_back(add(std::move(leaf)));
        }
        if (leaves.size() == 1) {
          outputs.push_back(leaves[0]);
        } else {
          CircuitNode prod;
          prod.kind = NodeKind::product;
          prod.children = std::move(leaves);
          outputs.push_back(add(std::move(prod)));
        }
      }
      return outputs;
    }
    std::vector<std::uint32_t> products;
    for (std::uint32_t p : partitions_of[region]) {
      const std::vector<std::uint32_t> left = self(self, g.partitions[p].left);
      const std::vector<std::uint32_t> right = self(self, g.partitions[p].right);
      for (std::uint32_t a : left) {
        for (std::uint32_t b : right) {
          CircuitNode prod;
          prod.kind = NodeKind::product;
          prod.children = {a, b};
          products.push_back(add(std::move(prod)));
        }
      }
    }
    const std::size_t count = region == 0 ? 1 : params.sums;
    for (std::size_t k = 0; k < count; ++k) {
      CircuitNode sum;
      sum.kind = NodeKind::sum;
      sum.children = products;
      outputs.push_back(add(std::move(sum)));
    }
    return outputs;
  };
  emit(emit, 0);
  out.circuit = Circuit(num_vars, std::move(nodes));
  return out;
}

ValidationReport validate(const Circuit& circuit) {
  ValidationReport report;
  const auto& nodes = circuit.nodes();
  std::vector<Bits> scopes(nodes.size(), atom_bits(circuit.num_vars()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const CircuitNode& n = nodes[i];
    Bits& s = scopes[i];
    if (n.kind == NodeKind::leaf) {
      s[n.atom / 64] |= std::uint64_t{1} << (n.atom % 64);
      continue;
    }
    for (std::size_t j = 0; j < n.children.size(); ++j) {
      const Bits& cs = scopes[n.children[j]];
      if (n.kind == NodeKind::sum && j > 0 && cs != scopes[n.children[0]]) {
        if (report.complete) report.detail += "sum node " + std::to_string(i) + " mixes scopes; ";
        report.complete = false;
      }
      for (std::size_t w = 0; w < s.size(); ++w) {
        if (n.kind == NodeKind::product && (s[w] & cs[w]) != 0) {
          if (report.decomposable) report.detail += "product node " + std::to_string(i) + " has overlapping children; ";
          report.decomposable = false;
        }
        s[w] |= cs[w];
      }
    }
  }
  const Bits& rs = scopes.back();
  for (std::size_t v = 0; v < circuit.num_vars(); ++v) {
    if (((rs[v / 64] >> (v % 64)) & 1u) == 0) {
      report.covers_all = false;
      report.detail += "root misses variable " + std::to_string(v) + "; ";
      break;
    }
  }
  return report;
}

ValidationReport validate(const RegionGraph& graph) {
  ValidationReport report;
  if (graph.regions.empty() || graph.regions[0].scope.size() != graph.num_vars) {
    report.covers_all = false;
    report.detail += "root region does not cover all variables; ";
  }
  for (const Partition& p : graph.partitions) {
    std::vector<std::uint32_t> merged;
    const auto& l = graph.regions[p.left].scope;
    const auto& r = graph.regions[p.right].scope;
    std::vector<std::uint32_t> both;
    std::set_intersection(l.begin(), l.end(), r.begin(), r.end(), std::back_inserter(both));
    if (!both.empty()) {
      report.decomposable = false;
      report.detail += "partition children overlap; ";
    }
    std::set_union(l.begin(), l.end(), r.begin(), r.end(), std::back_inserter(merged));
    if (merged != graph.regions[p.parent].scope) {
      report.complete = false;
      report.detail += "partition does not cover its parent; ";
    }
  }
  return report;
}

double leaf_logdensity(const LeafGaussian& leaf, double re, double im) {
  const double det = leaf.s11 * leaf.s22 - leaf.s12 * leaf.s12;
  if (!(leaf.s11 > 0.0) || !(det > 0.0)) throw DomainError("leaf covariance is not positive definite");
  const double p[kLeafSlots] = {leaf.mu_re, leaf.mu_im, leaf.s11, leaf.s12, leaf.s22};
  return leaf_value(p, re, im);
}

LeafGaussian leaf_from_raw(std::span<const double> raw) {
  if (raw.size() < kLeafSlots) throw DimensionError("leaf needs five raw parameters");
  const double l11 = softplus(raw[2]);
  const double l21 = raw[3];
  const double l22 = softplus(raw[4]);
  return LeafGaussian{raw[0], raw[1], l11 * l11 + kVarianceFloor, l11 * l21,
                      l21 * l21 + l22 * l22 + kVarianceFloor};
}

std::vector<double> decode_params(const Circuit& circuit, std::span<const double> raw) {
  if (raw.size() != circuit.num_params()) {
    throw DimensionError("expected " + std::to_string(circuit.num_params()) +
                         " raw circuit parameters, got " + std::to_string(raw.size()));
  }
  std::vector<double> decoded(raw.size());
  decode_into(circuit, raw.data(), decoded.data());
  return decoded;
}

std::vector<double> uniform_params(const Circuit& circuit, const LeafGaussian& leaf) {
  std::vector<double> decoded(circuit.num_params());
  for (const CircuitNode& n : circuit.nodes()) {
    if (n.kind == NodeKind::sum) {
      const double lw = -std::log(static_cast<double>(n.children.size()));
      std::fill_n(decoded.begin() + static_cast<std::ptrdiff_t>(n.param_offset), n.children.size(), lw);
    } else if (n.kind == NodeKind::leaf) {
      double* p = decoded.data() + n.param_offset;
      p[0] = leaf.mu_re;
      p[1] = leaf.mu_im;
      p[2] = leaf.s11;
      p[3] = leaf.s12;
      p[4] = leaf.s22;
    }
  }
  return decoded;
}

double log_likelihood(const Circuit& circuit, std::span<const double> decoded,
                      std::span<const double> values, std::span<const std::uint8_t> observed) {
  if (decoded.size() != circuit.num_params()) throw DimensionError("decoded parameter count mismatch");
  if (values.size() != 2 * circuit.num_vars()) {
    throw ContractError("circuit expects " + std::to_string(circuit.num_vars()) +
                        " coefficient pairs, got " + std::to_string(values.size()) + " values");
  }
  if (!observed.empty() && observed.size() != circuit.num_vars()) {
    throw ContractError("observation mask size mismatch");
  }
  std::vector<double> node_values(circuit.nodes().size());
  forward_nodes(circuit, decoded.data(), values.data(), observed.empty() ? nullptr : observed.data(),
                node_values.data());
  return node_values.back();
}

Var circuit_log_likelihood(const Circuit& circuit, const Var& raw, const Var& values,
                           std::vector<std::uint8_t> observed) {
  const Tensor& rv = raw.value();
  const Tensor& vv = values.value();
  if (rv.rank() != 2 || rv.dim(1) != circuit.num_params()) {
    throw DimensionError("raw circuit parameters must be [B x " +
                         std::to_string(circuit.num_params()) + "], got " +
                         shape_to_string(rv.shape()));
  }
  if (vv.rank() != 2 || vv.dim(0) != rv.dim(0) || vv.dim(1) != 2 * circuit.num_vars()) {
    throw ContractError("coefficient values must be [B x " + std::to_string(2 * circuit.num_vars()) +
                        "], got " + shape_to_string(vv.shape()));
  }
  if (!observed.empty() && observed.size() != circuit.num_vars()) {
    throw ContractError("observation mask size mismatch");
  }
  const std::size_t batch = rv.dim(0);
  const std::size_t p = circuit.num_params();
  const std::size_t n = circuit.nodes().size();
  const std::size_t w = vv.dim(1);
  std::vector<double> decoded(batch * p);
  std::vector<double> node_values(batch * n);
  const std::uint8_t* mask = observed.empty() ? nullptr : observed.data();
  Tensor out(Shape{batch});
  for (std::size_t b = 0; b < batch; ++b) {
    decode_into(circuit, rv.data() + b * p, decoded.data() + b * p);
    forward_nodes(circuit, decoded.data() + b * p, vv.data() + b * w, mask, node_values.data() + b * n);
    out[b] = node_values[b * n + n - 1];
  }
  return raw.tape().record(
      OpKind::custom, {raw, values}, std::move(out),
      [&circuit, batch, p, n, w, decoded = std::move(decoded), node_values = std::move(node_values),
       observed = std::move(observed)](const BackwardArgs& args) {
        Tensor* g_raw = args.input_grads[0];
        Tensor* g_val = args.input_grads[1];
        if (!g_raw && !g_val) return;
        const std::uint8_t* mask = observed.empty() ? nullptr : observed.data();
        std::vector<double> d_decoded(p);
        std::vector<double> adj;
        for (std::size_t b = 0; b < batch; ++b) {
          std::fill(d_decoded.begin(), d_decoded.end(), 0.0);
          backward_nodes(circuit, decoded.data() + b * p, args.inputs[1]->data() + b * w, mask,
                         node_values.data() + b * n, args.grad[b], d_decoded.data(),
                         g_val ? g_val->data() + b * w : nullptr, adj);
          if (g_raw) {
            decode_backward(circuit, args.inputs[0]->data() + b * p, decoded.data() + b * p,
                            d_decoded.data(), g_raw->data() + b * p);
          }
        }
      });
}

}  // namespace recown
