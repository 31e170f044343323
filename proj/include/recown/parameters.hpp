#pragma once

#include <string>
#include <vector>

#include "recown/tape.hpp"

namespace recown {

// A trainable tensor owned by some model, addressed by a stable name.
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

// Registers each tensor on the tape, as a parameter when `trainable` and as a
// constant otherwise.
std::vector<Var> bind_parameters(Tape& tape, const std::vector<NamedTensor>& params,
                                 bool trainable);

std::size_t parameter_count(const std::vector<NamedTensor>& params);

}  // namespace recown
