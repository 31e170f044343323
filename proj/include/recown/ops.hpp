#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "recown/tape.hpp"

// Differentiable operations over tape variables. Binary elementwise ops
// broadcast numpy-style (trailing dimensions aligned, size-1 dims stretch).
namespace recown::ad {

Var matmul(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var neg(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var softplus(const Var& a);

Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);

// Reductions. Without an axis the result is a scalar (shape {}); with an axis
// that dimension is removed. max/min send the gradient to the first extremum.
Var sum(const Var& a, std::optional<std::size_t> axis = std::nullopt);
Var mean(const Var& a, std::optional<std::size_t> axis = std::nullopt);
Var max(const Var& a, std::optional<std::size_t> axis = std::nullopt);
Var min(const Var& a, std::optional<std::size_t> axis = std::nullopt);

Var reshape(const Var& a, Shape shape);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);

// out[..., j] = a[..., index[j]], or 0 where index[j] < 0.
Var gather_last(const Var& a, std::vector<std::int64_t> index);
// out[..., index[j]] += a[..., j] for index[j] >= 0; out has `out_len` columns.
Var scatter_add_last(const Var& a, std::vector<std::int64_t> index, std::size_t out_len);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }

}  // namespace recown::ad
