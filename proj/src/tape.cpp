#include "recown/tape.hpp"

#include <atomic>
#include <optional>

#include "recown/error.hpp"

namespace recown {

namespace {

std::uint64_t next_generation() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::neg: return "neg";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::sqrt: return "sqrt";
    case OpKind::square: return "square";
    case OpKind::softplus: return "softplus";
    case OpKind::reduce_sum: return "sum";
    case OpKind::reduce_mean: return "mean";
    case OpKind::reduce_max: return "max";
    case OpKind::reduce_min: return "min";
    case OpKind::reshape: return "reshape";
    case OpKind::slice: return "slice";
    case OpKind::concat: return "concat";
    case OpKind::gather: return "gather";
    case OpKind::scatter_add: return "scatter_add";
    case OpKind::custom: return "custom";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!valid()) throw ContractError("use of a stale or empty Var");
  return tape_->nodes_[id_].value;
}

Tape& Var::tape() const {
  if (!valid()) throw ContractError("use of a stale or empty Var");
  return *tape_;
}

bool Var::valid() const noexcept {
  return tape_ != nullptr && tape_->generation_ == generation_ && id_ < tape_->nodes_.size();
}

const Tensor& Gradients::of(const Var& parameter) const {
  if (parameter.generation() != generation_) {
    throw ContractError("Var was recorded on a different tape than these gradients");
  }
  auto it = grads_.find(parameter.id());
  if (it == grads_.end()) {
    throw ContractError("no gradient recorded for node " + std::to_string(parameter.id()));
  }
  return it->second;
}

bool Gradients::contains(const Var& parameter) const {
  return parameter.generation() == generation_ && grads_.count(parameter.id()) != 0;
}

Tape::Tape() : generation_(next_generation()) {}

void Tape::check_owned(const Var& v) const {
  if (v.tape_ != this || v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

Var Tape::constant(Tensor value) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{OpKind::constant, {}, std::move(value), {}, false});
  return Var(this, id, generation_);
}

Var Tape::parameter(Tensor value) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{OpKind::parameter, {}, std::move(value), {}, true});
  return Var(this, id, generation_);
}

Var Tape::record(OpKind kind, std::span<const Var> inputs, Tensor value, BackwardFn backward) {
  Node node{kind, {}, std::move(value), std::move(backward), false};
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (!node.backward) node.requires_grad = false;
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(std::move(node));
  return Var(this, id, generation_);
}

Var Tape::record(OpKind kind, std::initializer_list<Var> inputs, Tensor value,
                 BackwardFn backward) {
  return record(kind, std::span<const Var>(inputs.begin(), inputs.size()), std::move(value),
                std::move(backward));
}

Gradients Tape::backward(const Var& loss) {
  check_owned(loss);
  if (loss.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_to_string(loss.value().shape()));
  }
  if (!loss.value().all_finite()) {
    throw DomainError("loss is not finite");
  }

  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[loss.id_] = Tensor(nodes_[loss.id_].value.shape(), 1.0);

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::int64_t i = loss.id_; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!grads[i] || !node.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::uint32_t in : node.inputs) {
      in_values.push_back(&nodes_[in].value);
      if (nodes_[in].requires_grad) {
        if (!grads[in]) grads[in] = Tensor(nodes_[in].value.shape(), 0.0);
        in_grads.push_back(&*grads[in]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardArgs{node.value, *grads[i], in_values, in_grads});
    // Intermediate gradients are no longer needed once propagated.
    if (node.kind != OpKind::parameter) grads[i].reset();
  }

  Gradients out;
  out.generation_ = generation_;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != OpKind::parameter) continue;
    out.grads_.emplace(static_cast<std::uint32_t>(i),
                       grads[i] ? std::move(*grads[i]) : Tensor(nodes_[i].value.shape(), 0.0));
  }
  clear();
  return out;
}

void Tape::clear() {
  nodes_.clear();
  generation_ = next_generation();
}

}  // namespace recown
