#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recown/tape.hpp"

namespace recown {

// Hyperparameters of the random region graph: depth D, repetitions R,
// sums per internal region K, input distributions per leaf region L.
struct StructureParams {
  std::size_t depth = 2;
  std::size_t repetitions = 4;
  std::size_t sums = 4;
  std::size_t leaves = 4;
  std::uint64_t seed = 0;
};

struct Region {
  std::vector<std::uint32_t> scope;  // sorted scope atoms
  std::size_t depth = 0;
  bool leaf = false;
};

// Splits `parent` into the disjoint, covering pair (left, right).
struct Partition {
  std::uint32_t parent = 0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::size_t repetition = 0;
};

struct RegionGraph {
  StructureParams params;
  std::size_t num_vars = 0;
  std::size_t effective_depth = 0;
  bool depth_clamped = false;
  std::vector<Region> regions;  // regions[0] is the root
  std::vector<Partition> partitions;
};

enum class NodeKind : std::uint8_t { leaf, product, sum };

// Parameter slots per leaf: raw (mu_re, mu_im, l11, l21, l22) or decoded
// (mu_re, mu_im, s11, s12, s22).
inline constexpr std::size_t kLeafSlots = 5;
// Added to the diagonal of every leaf covariance.
inline constexpr double kVarianceFloor = 1e-6;

struct CircuitNode {
  NodeKind kind = NodeKind::leaf;
  std::vector<std::uint32_t> children;
  std::uint32_t atom = 0;          // leaf only
  std::size_t param_offset = 0;    // leaf: kLeafSlots slots; sum: one slot per child
};

// Sum-product graph over (Re, Im) pairs. Nodes are topologically ordered,
// children first; the last node is the root. Parameters are supplied
// externally per evaluation.
class Circuit {
 public:
  Circuit() = default;
  Circuit(std::size_t num_vars, std::vector<CircuitNode> nodes);

  const std::vector<CircuitNode>& nodes() const noexcept { return nodes_; }
  std::uint32_t root() const noexcept { return static_cast<std::uint32_t>(nodes_.size() - 1); }
  std::size_t num_vars() const noexcept { return num_vars_; }
  std::size_t num_params() const noexcept { return num_params_; }
  std::size_t num_leaves() const noexcept { return num_leaves_; }
  std::size_t num_sums() const noexcept { return num_sums_; }
  std::size_t num_products() const noexcept { return nodes_.size() - num_leaves_ - num_sums_; }

 private:
  std::size_t num_vars_ = 0;
  std::vector<CircuitNode> nodes_;
  std::size_t num_params_ = 0;
  std::size_t num_leaves_ = 0;
  std::size_t num_sums_ = 0;
};

struct Structure {
  RegionGraph graph;
  Circuit circuit;
};

// Random RAT-style structure; a pure function of (num_vars, params). Depth is
// clamped to floor(log2(num_vars)) with a warning on stderr when too deep.
Structure build_structure(std::size_t num_vars, const StructureParams& params);

struct ValidationReport {
  bool complete = true;      // sum children share one scope
  bool decomposable = true;  // product children are disjoint
  bool covers_all = true;    // root scope is every variable
  std::string detail;
  bool ok() const noexcept { return complete && decomposable && covers_all; }
};

ValidationReport validate(const Circuit& circuit);
ValidationReport validate(const RegionGraph& graph);

struct LeafGaussian {
  double mu_re = 0.0;
  double mu_im = 0.0;
  double s11 = 1.0;
  double s12 = 0.0;
  double s22 = 1.0;
};

// Bivariate normal log-density of (re, im).
double leaf_logdensity(const LeafGaussian& leaf, double re, double im);

// Leaf from raw slots: Sigma = L L^T + floor I with L lower-triangular,
// softplus-positive diagonal.
LeafGaussian leaf_from_raw(std::span<const double> raw);

// Raw per-input parameters -> decoded (log-softmax sum weights, leaf moments).
std::vector<double> decode_params(const Circuit& circuit, std::span<const double> raw);

// Decoded layout filled with uniform weights and one leaf for every slot.
std::vector<double> uniform_params(const Circuit& circuit, const LeafGaussian& leaf);

// Bottom-up log-space evaluation with decoded parameters. `values` holds
// (re, im) per atom. Atoms with observed[v] == 0 are marginalized (their
// leaves contribute log 1); an empty mask observes every atom.
double log_likelihood(const Circuit& circuit, std::span<const double> decoded,
                      std::span<const double> values, std::span<const std::uint8_t> observed = {});

// Differentiable batched evaluation: raw [B x P], values [B x 2V] -> [B].
// The circuit must outlive the tape's backward pass.
Var circuit_log_likelihood(const Circuit& circuit, const Var& raw, const Var& values,
                           std::vector<std::uint8_t> observed = {});

}  // namespace recown
