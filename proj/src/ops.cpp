#include "recown/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "recown/error.hpp"

namespace recown::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// ---------------------------------------------------------------------------
// Broadcasting

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> a_strides;
  std::vector<std::size_t> b_strides;
};

std::vector<std::size_t> aligned_strides(const Shape& in, std::size_t out_rank,
                                         const Shape& out) {
  std::vector<std::size_t> strides(out_rank, 0);
  std::size_t stride = 1;
  const std::size_t offset = out_rank - in.size();
  for (std::size_t i = in.size(); i-- > 0;) {
    strides[i + offset] = (in[i] == 1 && out[i + offset] != 1) ? 0 : stride;
    stride *= in[i];
  }
  return strides;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  BroadcastPlan plan;
  plan.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("cannot broadcast " + shape_to_string(a) + " with " +
                           shape_to_string(b));
    }
    plan.out[i] = std::max(da, db);
  }
  plan.a_strides = aligned_strides(a, rank, plan.out);
  plan.b_strides = aligned_strides(b, rank, plan.out);
  return plan;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <typename F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  const std::size_t rank = plan.out.size();
  const std::size_t total = shape_size(plan.out);
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<std::size_t> counter(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  const std::size_t inner = plan.out.back();
  const std::size_t sa = plan.a_strides.back();
  const std::size_t sb = plan.b_strides.back();
  for (std::size_t o = 0; o < total;) {
    for (std::size_t j = 0; j < inner; ++j, ++o) f(o, ia + j * sa, ib + j * sb);
    // advance the odometer over the outer dimensions
    for (std::size_t d = rank - 1; d-- > 0;) {
      ia += plan.a_strides[d];
      ib += plan.b_strides[d];
      if (++counter[d] < plan.out[d]) break;
      ia -= plan.a_strides[d] * plan.out[d];
      ib -= plan.b_strides[d] * plan.out[d];
      counter[d] = 0;
    }
  }
}

enum class Binary { add, sub, mul, div };

Var binary(Binary kind, const Var& a, const Var& b) {
  Tape& tape = a.tape();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  BroadcastPlan plan = plan_broadcast(av.shape(), bv.shape());
  Tensor out(plan.out);
  const double* pa = av.data();
  const double* pb = bv.data();
  double* po = out.data();

  if (kind == Binary::div) {
    for (double v : bv.values()) {
      if (v == 0.0) throw DomainError("division by zero");
    }
  }

  const bool same = av.shape() == bv.shape();
  auto apply = [&](auto op) {
    if (same) {
      for (std::size_t i = 0; i < out.size(); ++i) po[i] = op(pa[i], pb[i]);
    } else {
      for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) {
        po[o] = op(pa[i], pb[j]);
      });
    }
  };
  switch (kind) {
    case Binary::add: apply([](double x, double y) { return x + y; }); break;
    case Binary::sub: apply([](double x, double y) { return x - y; }); break;
    case Binary::mul: apply([](double x, double y) { return x * y; }); break;
    case Binary::div: apply([](double x, double y) { return x / y; }); break;
  }

  static constexpr OpKind kinds[] = {OpKind::add, OpKind::sub, OpKind::mul, OpKind::div};
  return tape.record(
      kinds[static_cast<int>(kind)], {a, b}, std::move(out),
      [kind, plan = std::move(plan), same](const BackwardArgs& args) {
        const double* g = args.grad.data();
        const double* xa = args.inputs[0]->data();
        const double* xb = args.inputs[1]->data();
        double* ga = args.input_grads[0] ? args.input_grads[0]->data() : nullptr;
        double* gb = args.input_grads[1] ? args.input_grads[1]->data() : nullptr;
        auto visit = [&](std::size_t o, std::size_t i, std::size_t j) {
          switch (kind) {
            case Binary::add:
              if (ga) ga[i] += g[o];
              if (gb) gb[j] += g[o];
              break;
            case Binary::sub:
              if (ga) ga[i] += g[o];
              if (gb) gb[j] -= g[o];
              break;
            case Binary::mul:
              if (ga) ga[i] += g[o] * xb[j];
              if (gb) gb[j] += g[o] * xa[i];
              break;
            case Binary::div:
              if (ga) ga[i] += g[o] / xb[j];
              if (gb) gb[j] -= g[o] * xa[i] / (xb[j] * xb[j]);
              break;
          }
        };
        if (same) {
          for (std::size_t o = 0; o < args.grad.size(); ++o) visit(o, o, o);
        } else {
          for_each_broadcast(plan, visit);
        }
      });
}

// Elementwise unary op: forward f(x), derivative df(x, y) with y = f(x).
template <typename Fwd, typename Deriv>
Var unary(OpKind kind, const Var& a, Fwd fwd, Deriv deriv) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return a.tape().record(kind, {a}, std::move(out), [deriv](const BackwardArgs& args) {
    if (!args.input_grads[0]) return;
    const Tensor& x = *args.inputs[0];
    Tensor& gx = *args.input_grads[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      gx[i] += args.grad[i] * deriv(x[i], args.output[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

enum class Reduce { sum, mean, max, min };

Var reduce(Reduce kind, const Var& a, std::optional<std::size_t> axis) {
  const Tensor& av = a.value();
  Shape out_shape;
  AxisSplit s;
  if (axis) {
    s = split_axis(av.shape(), *axis);
    out_shape = av.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(*axis));
  } else {
    s.outer = 1;
    s.extent = av.size();
    s.inner = 1;
  }
  if (s.extent == 0) throw DimensionError("reduction over an empty axis");
  Tensor out(out_shape);
  // For max/min: index along the axis of the winning element.
  std::vector<std::size_t> arg(out.size(), 0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t dst = o * s.inner + i;
      const double* src = av.data() + o * s.extent * s.inner + i;
      double acc = src[0];
      std::size_t best = 0;
      for (std::size_t k = 1; k < s.extent; ++k) {
        const double v = src[k * s.inner];
        switch (kind) {
          case Reduce::sum:
          case Reduce::mean: acc += v; break;
          case Reduce::max:
            if (v > acc) acc = v, best = k;
            break;
          case Reduce::min:
            if (v < acc) acc = v, best = k;
            break;
        }
      }
      if (kind == Reduce::mean) acc /= static_cast<double>(s.extent);
      out[dst] = acc;
      arg[dst] = best;
    }
  }
  static constexpr OpKind kinds[] = {OpKind::reduce_sum, OpKind::reduce_mean,
                                     OpKind::reduce_max, OpKind::reduce_min};
  return a.tape().record(
      kinds[static_cast<int>(kind)], {a}, std::move(out),
      [kind, s, arg = std::move(arg)](const BackwardArgs& args) {
        if (!args.input_grads[0]) return;
        Tensor& gx = *args.input_grads[0];
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t dst = o * s.inner + i;
            double* g = gx.data() + o * s.extent * s.inner + i;
            const double go = args.grad[dst];
            switch (kind) {
              case Reduce::sum:
                for (std::size_t k = 0; k < s.extent; ++k) g[k * s.inner] += go;
                break;
              case Reduce::mean: {
                const double share = go / static_cast<double>(s.extent);
                for (std::size_t k = 0; k < s.extent; ++k) g[k * s.inner] += share;
                break;
              }
              case Reduce::max:
              case Reduce::min: g[arg[dst] * s.inner] += go; break;
            }
          }
        }
      });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul of " + shape_to_string(av.shape()) + " and " +
                         shape_to_string(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out(Shape{m, n});
  MatMap(out.data(), m, n).noalias() = ConstMatMap(av.data(), m, k) * ConstMatMap(bv.data(), k, n);
  return a.tape().record(OpKind::matmul, {a, b}, std::move(out),
                         [m, k, n](const BackwardArgs& args) {
                           ConstMatMap g(args.grad.data(), m, n);
                           if (args.input_grads[0]) {
                             MatMap(args.input_grads[0]->data(), m, k).noalias() +=
                                 g * ConstMatMap(args.inputs[1]->data(), k, n).transpose();
                           }
                           if (args.input_grads[1]) {
                             MatMap(args.input_grads[1]->data(), k, n).noalias() +=
                                 ConstMatMap(args.inputs[0]->data(), m, k).transpose() * g;
                           }
                         });
}

Var add(const Var& a, const Var& b) { return binary(Binary::add, a, b); }
Var sub(const Var& a, const Var& b) { return binary(Binary::sub, a, b); }
Var mul(const Var& a, const Var& b) { return binary(Binary::mul, a, b); }
Var div(const Var& a, const Var& b) { return binary(Binary::div, a, b); }

Var neg(const Var& a) {
  return unary(OpKind::neg, a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var exp(const Var& a) {
  return unary(OpKind::exp, a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(OpKind::log, a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  return unary(OpKind::tanh, a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(OpKind::sigmoid, a, stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Var sqrt(const Var& a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw DomainError("sqrt of non-positive value " + std::to_string(v));
  }
  return unary(OpKind::sqrt, a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Var square(const Var& a) {
  return unary(OpKind::square, a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var softplus(const Var& a) {
  return unary(OpKind::softplus, a, stable_softplus,
               [](double x, double) { return stable_sigmoid(x); });
}

Var scale(const Var& a, double factor) {
  return unary(OpKind::mul, a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var add_scalar(const Var& a, double offset) {
  return unary(OpKind::add, a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Var sum(const Var& a, std::optional<std::size_t> axis) { return reduce(Reduce::sum, a, axis); }
Var mean(const Var& a, std::optional<std::size_t> axis) { return reduce(Reduce::mean, a, axis); }
Var max(const Var& a, std::optional<std::size_t> axis) { return reduce(Reduce::max, a, axis); }
Var min(const Var& a, std::optional<std::size_t> axis) { return reduce(Reduce::min, a, axis); }

Var reshape(const Var& a, Shape shape) {
  const Tensor& av = a.value();
  if (shape_size(shape) != av.size()) {
    throw DimensionError("cannot reshape " + shape_to_string(av.shape()) + " to " +
                         shape_to_string(shape));
  }
  return a.tape().record(OpKind::reshape, {a}, av.reshaped(std::move(shape)),
                         [](const BackwardArgs& args) {
                           if (!args.input_grads[0]) return;
                           double* g = args.input_grads[0]->data();
                           for (std::size_t i = 0; i < args.grad.size(); ++i) g[i] += args.grad[i];
                         });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  const AxisSplit s = split_axis(av.shape(), axis);
  if (begin > end || end > s.extent) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range on axis of size " + std::to_string(s.extent));
  }
  Shape shape = av.shape();
  shape[axis] = end - begin;
  Tensor out(shape);
  const std::size_t len = (end - begin) * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(av.data() + (o * s.extent + begin) * s.inner, len, out.data() + o * len);
  }
  return a.tape().record(OpKind::slice, {a}, std::move(out),
                         [s, begin, len](const BackwardArgs& args) {
                           if (!args.input_grads[0]) return;
                           double* g = args.input_grads[0]->data();
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             double* dst = g + (o * s.extent + begin) * s.inner;
                             const double* src = args.grad.data() + o * len;
                             for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
                           }
                         });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const Shape& first = parts[0].value().shape();
  if (axis >= first.size()) throw DimensionError("concat axis out of range");
  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    const Shape& ps = p.value().shape();
    if (ps.size() != first.size()) throw DimensionError("concat rank mismatch");
    for (std::size_t d = 0; d < ps.size(); ++d) {
      if (d != axis && ps[d] != first[d]) {
        throw DimensionError("concat shape mismatch: " + shape_to_string(ps) + " vs " +
                             shape_to_string(first));
      }
    }
    shape[axis] += ps[axis];
  }
  AxisSplit s = split_axis(shape, axis);
  for (const Var& p : parts) widths.push_back(p.value().shape()[axis] * s.inner);
  const std::size_t row = s.extent * s.inner;
  Tensor out(shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double* src = parts[p].value().data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(src + o * widths[p], widths[p], out.data() + o * row + offset);
    }
    offset += widths[p];
  }
  return parts[0].tape().record(
      OpKind::concat, parts, std::move(out), [s, row, widths](const BackwardArgs& args) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
          if (Tensor* g = args.input_grads[p]) {
            for (std::size_t o = 0; o < s.outer; ++o) {
              const double* src = args.grad.data() + o * row + offset;
              double* dst = g->data() + o * widths[p];
              for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += src[i];
            }
          }
          offset += widths[p];
        }
      });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var gather_last(const Var& a, std::vector<std::int64_t> index) {
  const Tensor& av = a.value();
  if (av.rank() == 0) throw DimensionError("gather_last on a scalar");
  const std::size_t width = av.shape().back();
  const std::size_t rows = av.size() / std::max<std::size_t>(width, 1);
  for (std::int64_t i : index) {
    if (i >= static_cast<std::int64_t>(width)) throw DimensionError("gather index out of range");
  }
  Shape shape = av.shape();
  shape.back() = index.size();
  Tensor out(shape);
  const std::size_t m = index.size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      if (index[j] >= 0) out[r * m + j] = av[r * width + static_cast<std::size_t>(index[j])];
    }
  }
  return a.tape().record(OpKind::gather, {a}, std::move(out),
                         [rows, width, index = std::move(index)](const BackwardArgs& args) {
                           if (!args.input_grads[0]) return;
                           double* g = args.input_grads[0]->data();
                           const std::size_t m = index.size();
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t j = 0; j < m; ++j) {
                               if (index[j] >= 0) {
                                 g[r * width + static_cast<std::size_t>(index[j])] +=
                                     args.grad[r * m + j];
                               }
                             }
                           }
                         });
}

Var scatter_add_last(const Var& a, std::vector<std::int64_t> index, std::size_t out_len) {
  const Tensor& av = a.value();
  if (av.rank() == 0 || av.shape().back() != index.size()) {
    throw DimensionError("scatter_add_last index length does not match last dimension");
  }
  for (std::int64_t i : index) {
    if (i >= static_cast<std::int64_t>(out_len)) throw DimensionError("scatter index out of range");
  }
  const std::size_t m = index.size();
  const std::size_t rows = av.size() / std::max<std::size_t>(m, 1);
  Shape shape = av.shape();
  shape.back() = out_len;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      if (index[j] >= 0) out[r * out_len + static_cast<std::size_t>(index[j])] += av[r * m + j];
    }
  }
  return a.tape().record(
      OpKind::scatter_add, {a}, std::move(out),
      [rows, out_len, index = std::move(index)](const BackwardArgs& args) {
        if (!args.input_grads[0]) return;
        double* g = args.input_grads[0]->data();
        const std::size_t m = index.size();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < m; ++j) {
            if (index[j] >= 0) {
              g[r * m + j] += args.grad[r * out_len + static_cast<std::size_t>(index[j])];
            }
          }
        }
      });
}

}  // namespace recown::ad
