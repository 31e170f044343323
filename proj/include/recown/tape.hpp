#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "recown/tensor.hpp"

namespace recown {

class Tape;

enum class OpKind {
  constant,
  parameter,
  matmul,
  add,
  sub,
  mul,
  div,
  neg,
  exp,
  log,
  tanh,
  sigmoid,
  sqrt,
  square,
  softplus,
  reduce_sum,
  reduce_mean,
  reduce_max,
  reduce_min,
  reshape,
  slice,
  concat,
  gather,
  scatter_add,
  custom,
};

std::string_view op_name(OpKind kind);

// Handle to a node recorded on a tape. Cheap to copy; only valid while the
// tape that produced it has not been cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const;
  std::uint32_t id() const noexcept { return id_; }
  std::uint64_t generation() const noexcept { return generation_; }
  bool valid() const noexcept;

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id, std::uint64_t generation)
      : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
  std::uint64_t generation_ = 0;
};

// Arguments handed to an op's adjoint rule. `input_grads[i]` is null when
// input i does not lead to any parameter.
struct BackwardArgs {
  const Tensor& output;
  const Tensor& grad;
  std::span<const Tensor* const> inputs;
  std::span<Tensor* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

// Parameter gradients returned by Tape::backward, keyed by the parameter's Var.
class Gradients {
 public:
  const Tensor& of(const Var& parameter) const;
  bool contains(const Var& parameter) const;
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  friend class Tape;
  std::uint64_t generation_ = 0;
  std::unordered_map<std::uint32_t, Tensor> grads_;
};

// Append-only record of a computation for reverse-mode differentiation.
// Single-threaded; independent tapes may live on different threads.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  // Appends a node. Inputs must live on this tape. `backward` may be empty for
  // ops with no adjoint (constants, integer-valued results).
  Var record(OpKind kind, std::span<const Var> inputs, Tensor value, BackwardFn backward);
  Var record(OpKind kind, std::initializer_list<Var> inputs, Tensor value, BackwardFn backward);

  // Reverse sweep from a scalar loss. Every parameter on the tape receives a
  // gradient (zero when unreachable). The tape is cleared afterwards.
  Gradients backward(const Var& loss);

  void clear();

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::uint64_t generation() const noexcept { return generation_; }
  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  OpKind kind(std::uint32_t id) const { return nodes_[id].kind; }
  std::span<const std::uint32_t> inputs(std::uint32_t id) const { return nodes_[id].inputs; }

  void check_owned(const Var& v) const;

 private:
  friend class Var;
  struct Node {
    OpKind kind;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    BackwardFn backward;
    bool requires_grad;
  };

  std::vector<Node> nodes_;
  std::uint64_t generation_;
};

}  // namespace recown
