#include "unimask/numkit/ops.hpp"

#include <cblas.h>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>

#include "unimask/error.hpp"

namespace unimask::nk {

namespace {

std::size_t norm_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

std::size_t prod(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t n = 1;
  for (std::size_t i = begin; i < end; ++i) n *= s[i];
  return n;
}

// Builds the result node and, when differentiation is live, wires its
// inputs and backward rule.
Tensor record(Shape shape, std::vector<double> value, std::string_view op,
              std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  if (grad_enabled()) {
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const auto& t : inputs) node->inputs.push_back(t.node_ptr());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

// Gradient buffer of input i, or nullptr when it does not take gradients.
double* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? in.ensure_grad() : nullptr;
}

// ---------------------------------------------------------------- broadcast

struct Broadcast {
  enum class Kind { kSame, kScalarB, kSuffixB, kSuffixA, kGeneral };
  Kind kind = Kind::kSame;
  Shape out;
  std::size_t na = 0, nb = 0;
  std::vector<std::size_t> a_strides, b_strides;  // per out dim, 0 = repeat
};

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Broadcast make_broadcast(const Shape& a, const Shape& b) {
  Broadcast bc;
  bc.na = numel(a);
  bc.nb = numel(b);
  const std::size_t r = std::max(a.size(), b.size());
  bc.out.assign(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("cannot broadcast shapes " + shape_str(a) +
                           " and " + shape_str(b));
    }
    bc.out[i] = std::max(da, db);
  }
  if (a == b) {
    bc.kind = Broadcast::Kind::kSame;
  } else if (bc.nb == 1 && bc.out == a) {
    bc.kind = Broadcast::Kind::kScalarB;
  } else if (is_suffix(b, a) && bc.out == a) {
    bc.kind = Broadcast::Kind::kSuffixB;
  } else if (is_suffix(a, b) && bc.out == b) {
    bc.kind = Broadcast::Kind::kSuffixA;
  } else {
    bc.kind = Broadcast::Kind::kGeneral;
    auto strides_for = [&](const Shape& s) {
      std::vector<std::size_t> st(r, 0);
      std::size_t acc = 1;
      for (std::size_t k = 0; k < s.size(); ++k) {
        const std::size_t src = s.size() - 1 - k;
        const std::size_t dst = r - 1 - k;
        st[dst] = s[src] == 1 ? 0 : acc;
        acc *= s[src];
      }
      return st;
    };
    bc.a_strides = strides_for(a);
    bc.b_strides = strides_for(b);
  }
  return bc;
}

template <class F>
void visit(const Broadcast& bc, F&& f) {
  const std::size_t n = numel(bc.out);
  switch (bc.kind) {
    case Broadcast::Kind::kSame:
      for (std::size_t i = 0; i < n; ++i) f(i, i, i);
      return;
    case Broadcast::Kind::kScalarB:
      for (std::size_t i = 0; i < n; ++i) f(i, i, std::size_t{0});
      return;
    case Broadcast::Kind::kSuffixB:
      for (std::size_t i = 0; i < n;) {
        for (std::size_t j = 0; j < bc.nb; ++j, ++i) f(i, i, j);
      }
      return;
    case Broadcast::Kind::kSuffixA:
      for (std::size_t i = 0; i < n;) {
        for (std::size_t j = 0; j < bc.na; ++j, ++i) f(i, j, i);
      }
      return;
    case Broadcast::Kind::kGeneral:
      break;
  }
  const std::size_t r = bc.out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += bc.a_strides[d];
      ib += bc.b_strides[d];
      if (idx[d] < bc.out[d]) break;
      ia -= bc.a_strides[d] * bc.out[d];
      ib -= bc.b_strides[d] * bc.out[d];
      idx[d] = 0;
    }
  }
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

template <BinOp op>
void binary_backward(const Broadcast& bc, Node& self) {
  const double* g = self.grad.data();
  const double* av = self.inputs[0]->value.data();
  const double* bv = self.inputs[1]->value.data();
  double* ga = input_grad(self, 0);
  double* gb = input_grad(self, 1);
  if (ga) {
    visit(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      if constexpr (op == BinOp::kAdd || op == BinOp::kSub) ga[ia] += g[i];
      if constexpr (op == BinOp::kMul) ga[ia] += g[i] * bv[ib];
      if constexpr (op == BinOp::kDiv) ga[ia] += g[i] / bv[ib];
    });
  }
  if (gb) {
    visit(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      if constexpr (op == BinOp::kAdd) gb[ib] += g[i];
      if constexpr (op == BinOp::kSub) gb[ib] -= g[i];
      if constexpr (op == BinOp::kMul) gb[ib] += g[i] * av[ia];
      if constexpr (op == BinOp::kDiv) gb[ib] -= g[i] * av[ia] / (bv[ib] * bv[ib]);
    });
  }
}

template <BinOp op>
Tensor binary_op(const Tensor& a, const Tensor& b, std::string_view name) {
  const Broadcast bc = make_broadcast(a.shape(), b.shape());
  std::vector<double> out(numel(bc.out));
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.data();
  visit(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    if constexpr (op == BinOp::kAdd) ov[i] = av[ia] + bv[ib];
    if constexpr (op == BinOp::kSub) ov[i] = av[ia] - bv[ib];
    if constexpr (op == BinOp::kMul) ov[i] = av[ia] * bv[ib];
    if constexpr (op == BinOp::kDiv) ov[i] = av[ia] / bv[ib];
  });
  return record(bc.out, std::move(out), name, {a, b},
                [bc](Node& self) { binary_backward<op>(bc, self); });
}

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  switch (op) {
    case BinOp::kAdd: return binary_op<BinOp::kAdd>(a, b, "add");
    case BinOp::kSub: return binary_op<BinOp::kSub>(a, b, "sub");
    case BinOp::kMul: return binary_op<BinOp::kMul>(a, b, "mul");
    case BinOp::kDiv: return binary_op<BinOp::kDiv>(a, b, "div");
  }
  throw ContractError("unknown binary op");
}

// Elementwise map with derivative expressed through (input, output).
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, std::string_view name, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return record(x.shape(), std::move(out), name, {x}, [deriv](Node& self) {
    double* gx = input_grad(self, 0);
    if (!gx) return;
    const double* xv = self.inputs[0]->value.data();
    const double* yv = self.value.data();
    const double* g = self.grad.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      gx[i] += g[i] * deriv(xv[i], yv[i]);
    }
  });
}

// ---------------------------------------------------------------- gemm

// Row-major C (M x N) = op(A) * op(B) + beta * C, beta is 0 or 1.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const double* a, const double* b, double beta,
          double* c) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (beta == 0.0) std::fill(c, c + m * n, 0.0);
    return;
  }
#if defined(__AVX2__)
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const RowMat>;
  Eigen::Map<RowMat> cm(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  const auto em = static_cast<Eigen::Index>(m), en = static_cast<Eigen::Index>(n),
             ek = static_cast<Eigen::Index>(k);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (beta == 0.0) {
      cm.noalias() = lhs * rhs;
    } else {
      cm.noalias() += lhs * rhs;
    }
  };
  if (trans_a) {
    const CMap am(a, ek, em);
    if (trans_b) {
      run(am.transpose(), CMap(b, en, ek).transpose());
    } else {
      run(am.transpose(), CMap(b, ek, en));
    }
  } else {
    const CMap am(a, em, ek);
    if (trans_b) {
      run(am, CMap(b, en, ek).transpose());
    } else {
      run(am, CMap(b, ek, en));
    }
  }
#else
  const auto lda = static_cast<blasint>(trans_a ? m : k);
  const auto ldb = static_cast<blasint>(trans_b ? k : n);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<blasint>(m),
              static_cast<blasint>(n), static_cast<blasint>(k), 1.0, a, lda, b,
              ldb, beta, c, static_cast<blasint>(n));
#endif
}

}  // namespace

// ------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kMul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kDiv); }

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(
      x, "add_scalar", [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, "sqrt", [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const auto xv = x.values();
  std::vector<double> out(x.size());
  auto cdf = std::make_shared<std::vector<double>>(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*cdf)[i] = 0.5 * (1.0 + std::erf(xv[i] * kInvSqrt2));
    out[i] = xv[i] * (*cdf)[i];
  }
  return record(x.shape(), std::move(out), "gelu", {x}, [cdf, inv_sqrt_2pi](Node& self) {
    double* gx = input_grad(self, 0);
    if (!gx) return;
    const double* v = self.inputs[0]->value.data();
    const double* g = self.grad.data();
    const double* c = cdf->data();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      gx[i] += g[i] * (c[i] + v[i] * inv_sqrt_2pi * std::exp(-0.5 * v[i] * v[i]));
    }
  });
}

// ------------------------------------------------------------------ matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(-2), k = a.dim(-1);
  const std::size_t kb = b.dim(-2), n = b.dim(-1);
  if (k != kb) {
    throw DimensionError("matmul inner dimensions differ: " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);

  // Weight-style right operand: fold a's batch into rows, one gemm.
  if (b_batch.empty()) {
    const std::size_t rows = numel(a_batch) * m;
    Shape out_shape = a_batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::vector<double> out(rows * n);
    gemm(false, false, rows, n, k, a.values().data(), b.values().data(), 0.0,
         out.data());
    return record(std::move(out_shape), std::move(out), "matmul", {a, b},
                  [rows, n, k](Node& self) {
                    const double* g = self.grad.data();
                    if (double* ga = input_grad(self, 0)) {
                      gemm(false, true, rows, k, n, g,
                           self.inputs[1]->value.data(), 1.0, ga);
                    }
                    if (double* gb = input_grad(self, 1)) {
                      gemm(true, false, k, n, rows,
                           self.inputs[0]->value.data(), g, 1.0, gb);
                    }
                  });
  }

  // General case: broadcast the batch dims, one gemm per output matrix.
  Shape a_b = a_batch, b_b = b_batch;
  const std::size_t r = std::max(a_b.size(), b_b.size());
  a_b.insert(a_b.begin(), r - a_b.size(), 1);
  b_b.insert(b_b.begin(), r - b_b.size(), 1);
  Shape batch(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (a_b[i] != b_b[i] && a_b[i] != 1 && b_b[i] != 1) {
      throw DimensionError("matmul batch dims do not broadcast: " +
                           shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    batch[i] = std::max(a_b[i], b_b[i]);
  }
  const std::size_t nbatch = numel(batch);
  std::vector<std::size_t> a_off(nbatch), b_off(nbatch);
  {
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t i = 0; i < nbatch; ++i) {
      std::size_t ia = 0, ib = 0;
      for (std::size_t d = 0; d < r; ++d) {
        ia = ia * a_b[d] + (a_b[d] == 1 ? 0 : idx[d]);
        ib = ib * b_b[d] + (b_b[d] == 1 ? 0 : idx[d]);
      }
      a_off[i] = ia * m * k;
      b_off[i] = ib * k * n;
      for (std::size_t d = r; d-- > 0;) {
        if (++idx[d] < batch[d]) break;
        idx[d] = 0;
      }
    }
  }
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(nbatch * m * n);
  for (std::size_t i = 0; i < nbatch; ++i) {
    gemm(false, false, m, n, k, a.values().data() + a_off[i],
         b.values().data() + b_off[i], 0.0, out.data() + i * m * n);
  }
  return record(std::move(out_shape), std::move(out), "matmul", {a, b},
                [a_off, b_off, m, n, k](Node& self) {
                  const double* g = self.grad.data();
                  double* ga = input_grad(self, 0);
                  double* gb = input_grad(self, 1);
                  const double* av = self.inputs[0]->value.data();
                  const double* bv = self.inputs[1]->value.data();
                  for (std::size_t i = 0; i < a_off.size(); ++i) {
                    const double* gi = g + i * m * n;
                    if (ga) gemm(false, true, m, k, n, gi, bv + b_off[i], 1.0,
                                 ga + a_off[i]);
                    if (gb) gemm(true, false, k, n, m, av + a_off[i], gi, 1.0,
                                 gb + b_off[i]);
                  }
                });
}

// ------------------------------------------------------------------ layout

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("cannot reshape " + shape_str(x.shape()) + " to " +
                         shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return record(std::move(shape), std::move(out), "reshape", {x},
                [](Node& self) {
                  double* gx = input_grad(self, 0);
                  if (!gx) return;
                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                    gx[i] += self.grad[i];
                  }
                });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const std::size_t r = x.rank();
  if (order.size() != r) {
    throw DimensionError("permute order has " + std::to_string(order.size()) +
                         " axes for shape " + shape_str(x.shape()));
  }
  std::vector<bool> seen(r, false);
  for (auto o : order) {
    if (o >= r || seen[o]) throw DimensionError("invalid permutation");
    seen[o] = true;
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t d = r; d-- > 1;) {
    in_strides[d - 1] = in_strides[d] * x.shape()[d];
  }
  Shape out_shape(r);
  std::vector<std::size_t> strides(r);
  for (std::size_t d = 0; d < r; ++d) {
    out_shape[d] = x.shape()[order[d]];
    strides[d] = in_strides[order[d]];
  }
  // src[i] = input offset of output element i.
  const std::size_t n = x.size();
  std::vector<std::size_t> src(n);
  {
    std::vector<std::size_t> idx(r, 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < n; ++i) {
      src[i] = off;
      for (std::size_t d = r; d-- > 0;) {
        ++idx[d];
        off += strides[d];
        if (idx[d] < out_shape[d]) break;
        off -= strides[d] * out_shape[d];
        idx[d] = 0;
      }
    }
  }
  std::vector<double> out(n);
  const auto xv = x.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[src[i]];
  return record(std::move(out_shape), std::move(out), "permute", {x},
                [src = std::move(src)](Node& self) {
                  double* gx = input_grad(self, 0);
                  if (!gx) return;
                  for (std::size_t i = 0; i < src.size(); ++i) {
                    gx[src[i]] += self.grad[i];
                  }
                });
}

Tensor transpose(const Tensor& x, int axis0, int axis1) {
  const std::size_t a0 = norm_axis(axis0, x.rank());
  const std::size_t a1 = norm_axis(axis1, x.rank());
  std::vector<std::size_t> order(x.rank());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::swap(order[a0], order[a1]);
  return permute(x, order);
}

Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t end) {
  const std::size_t ax = norm_axis(axis, x.rank());
  const std::size_t len = x.shape()[ax];
  if (start > end || end > len) {
    throw DimensionError("slice [" + std::to_string(start) + "," +
                         std::to_string(end) + ") out of range for axis of " +
                         std::to_string(len) + " in " + shape_str(x.shape()));
  }
  const std::size_t outer = prod(x.shape(), 0, ax);
  const std::size_t inner = prod(x.shape(), ax + 1, x.rank());
  const std::size_t width = (end - start) * inner;
  Shape out_shape = x.shape();
  out_shape[ax] = end - start;
  std::vector<double> out(outer * width);
  const auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((o * len + start) * inner),
                width, out.begin() + static_cast<std::ptrdiff_t>(o * width));
  }
  return record(std::move(out_shape), std::move(out), "slice", {x},
                [outer, len, start, inner, width](Node& self) {
                  double* gx = input_grad(self, 0);
                  if (!gx) return;
                  for (std::size_t o = 0; o < outer; ++o) {
                    double* dst = gx + (o * len + start) * inner;
                    const double* g = self.grad.data() + o * width;
                    for (std::size_t i = 0; i < width; ++i) dst[i] += g[i];
                  }
                });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  const std::size_t ax = norm_axis(axis, first.size());
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) {
      ok = d == ax || s[d] == first[d];
    }
    if (!ok) {
      throw DimensionError("concat shape mismatch: " + shape_str(first) +
                           " vs " + shape_str(s));
    }
    total += s[ax];
  }
  const std::size_t outer = prod(first, 0, ax);
  const std::size_t inner = prod(first, ax + 1, first.size());
  Shape out_shape = first;
  out_shape[ax] = total;
  std::vector<double> out(outer * total * inner);
  std::vector<std::size_t> widths, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[ax] * inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>(o * total * inner + off));
    }
    widths.push_back(w);
    offsets.push_back(off);
    off += w;
  }
  const std::size_t row = total * inner;
  return record(std::move(out_shape), std::move(out), "concat", parts,
                [outer, row, widths, offsets](Node& self) {
                  for (std::size_t p = 0; p < widths.size(); ++p) {
                    double* gp = input_grad(self, p);
                    if (!gp) continue;
                    for (std::size_t o = 0; o < outer; ++o) {
                      const double* g = self.grad.data() + o * row + offsets[p];
                      double* dst = gp + o * widths[p];
                      for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += g[i];
                    }
                  }
                });
}

Tensor stack(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("stack of zero tensors");
  const Shape& s = parts.front().shape();
  const int r = static_cast<int>(s.size()) + 1;
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw DimensionError("stack axis out of range");
  Shape expanded = s;
  expanded.insert(expanded.begin() + a, 1);
  std::vector<Tensor> views;
  views.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.shape() != s) {
      throw DimensionError("stack shape mismatch: " + shape_str(s) + " vs " +
                           shape_str(p.shape()));
    }
    views.push_back(reshape(p, expanded));
  }
  return concat(views, a);
}

Tensor gather(const Tensor& x, int axis, const std::vector<std::size_t>& indices) {
  const std::size_t ax = norm_axis(axis, x.rank());
  const std::size_t len = x.shape()[ax];
  for (auto i : indices) {
    if (i >= len) {
      throw DimensionError("gather index " + std::to_string(i) +
                           " out of range for axis of " + std::to_string(len));
    }
  }
  const std::size_t outer = prod(x.shape(), 0, ax);
  const std::size_t inner = prod(x.shape(), ax + 1, x.rank());
  const std::size_t k = indices.size();
  Shape out_shape = x.shape();
  out_shape[ax] = k;
  std::vector<double> out(outer * k * inner);
  const double* xv = x.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < k; ++j) {
      std::copy_n(xv + (o * len + indices[j]) * inner, inner,
                  out.data() + (o * k + j) * inner);
    }
  }
  return record(std::move(out_shape), std::move(out), "gather", {x},
                [outer, len, inner, indices](Node& self) {
                  double* gx = input_grad(self, 0);
                  if (!gx) return;
                  const std::size_t k = indices.size();
                  for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t j = 0; j < k; ++j) {
                      double* dst = gx + (o * len + indices[j]) * inner;
                      const double* g = self.grad.data() + (o * k + j) * inner;
                      for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i];
                    }
                  }
                });
}

// -------------------------------------------------------------- reductions

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return record({}, {s}, "sum", {x}, [](Node& self) {
    double* gx = input_grad(self, 0);
    if (!gx) return;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) gx[i] += g;
  });
}

Tensor sum(const Tensor& x, int axis, bool keepdim) {
  const std::size_t ax = norm_axis(axis, x.rank());
  const std::size_t outer = prod(x.shape(), 0, ax);
  const std::size_t len = x.shape()[ax];
  const std::size_t inner = prod(x.shape(), ax + 1, x.rank());
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[ax] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  }
  std::vector<double> out(outer * inner, 0.0);
  const double* xv = x.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      const double* src = xv + (o * len + l) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  return record(std::move(out_shape), std::move(out), "sum_axis", {x},
                [outer, len, inner](Node& self) {
                  double* gx = input_grad(self, 0);
                  if (!gx) return;
                  for (std::size_t o = 0; o < outer; ++o) {
                    const double* g = self.grad.data() + o * inner;
                    for (std::size_t l = 0; l < len; ++l) {
                      double* dst = gx + (o * len + l) * inner;
                      for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i];
                    }
                  }
                });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

// ----------------------------------------------------------------- softmax

namespace {

Tensor softmax_impl(const Tensor& x, std::size_t ax,
                    const std::vector<unsigned char>* allowed) {
  const std::size_t outer = prod(x.shape(), 0, ax);
  const std::size_t len = x.shape()[ax];
  const std::size_t inner = prod(x.shape(), ax + 1, x.rank());
  const double* xv = x.values().data();
  std::vector<double> out(x.size(), 0.0);
  const std::size_t period = allowed ? allowed->size() : 0;
  auto ok = [&](std::size_t i) {
    return !allowed || (*allowed)[i % period] != 0;
  };
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < len; ++l) {
        const std::size_t i = base + l * inner;
        if (ok(i)) mx = std::max(mx, xv[i]);
      }
      if (mx == -std::numeric_limits<double>::infinity()) {
        throw ContractError("softmax row has no admissible entry");
      }
      double z = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        const std::size_t i = base + l * inner;
        if (ok(i)) {
          out[i] = std::exp(xv[i] - mx);
          z += out[i];
        }
      }
      const double inv = 1.0 / z;
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] *= inv;
    }
  }
  return record(x.shape(), std::move(out), "softmax", {x},
                [outer, len, inner](Node& self) {
                  double* gx = input_grad(self, 0);
                  if (!gx) return;
                  const double* y = self.value.data();
                  const double* g = self.grad.data();
                  for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t in = 0; in < inner; ++in) {
                      const std::size_t base = o * len * inner + in;
                      double dot = 0.0;
                      for (std::size_t l = 0; l < len; ++l) {
                        const std::size_t i = base + l * inner;
                        dot += g[i] * y[i];
                      }
                      for (std::size_t l = 0; l < len; ++l) {
                        const std::size_t i = base + l * inner;
                        gx[i] += y[i] * (g[i] - dot);
                      }
                    }
                  }
                });
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  return softmax_impl(x, norm_axis(axis, x.rank()), nullptr);
}

Tensor masked_softmax(const Tensor& x, const std::vector<unsigned char>& allowed) {
  if (allowed.empty() || x.size() % allowed.size() != 0 ||
      allowed.size() % x.dim(-1) != 0) {
    throw DimensionError("softmax mask of " + std::to_string(allowed.size()) +
                         " entries does not tile " + shape_str(x.shape()));
  }
  return softmax_impl(x, x.rank() - 1, &allowed);
}

// -------------------------------------------------------------- layer norm

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const std::size_t width = x.dim(-1);
  if (gamma.shape() != Shape{width} || beta.shape() != Shape{width}) {
    throw DimensionError("layer_norm affine params must be [" +
                         std::to_string(width) + "], got " +
                         shape_str(gamma.shape()) + " and " +
                         shape_str(beta.shape()));
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm eps must be positive");
  const std::size_t rows = x.size() / width;
  std::vector<double> out(x.size()), xhat(x.size()), rstd(rows);
  const double* xv = x.values().data();
  const double* gv = gamma.values().data();
  const double* bv = beta.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv + r * width;
    double mu = 0.0;
    for (std::size_t i = 0; i < width; ++i) mu += row[i];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t i = 0; i < width; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(width);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < width; ++i) {
      const std::size_t k = r * width + i;
      xhat[k] = (row[i] - mu) * rstd[r];
      out[k] = gv[i] * xhat[k] + bv[i];
    }
  }
  return record(x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
                [rows, width, xhat = std::move(xhat),
                 rstd = std::move(rstd)](Node& self) {
                  const double* g = self.grad.data();
                  const double* gv = self.inputs[1]->value.data();
                  double* gx = input_grad(self, 0);
                  double* ggamma = input_grad(self, 1);
                  double* gbeta = input_grad(self, 2);
                  const double inv_w = 1.0 / static_cast<double>(width);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const std::size_t base = r * width;
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t i = 0; i < width; ++i) {
                      const double dxh = g[base + i] * gv[i];
                      m1 += dxh;
                      m2 += dxh * xhat[base + i];
                      if (ggamma) ggamma[i] += g[base + i] * xhat[base + i];
                      if (gbeta) gbeta[i] += g[base + i];
                    }
                    if (!gx) continue;
                    m1 *= inv_w;
                    m2 *= inv_w;
                    for (std::size_t i = 0; i < width; ++i) {
                      const double dxh = g[base + i] * gv[i];
                      gx[base + i] +=
                          rstd[r] * (dxh - m1 - xhat[base + i] * m2);
                    }
                  }
                });
}

}  // namespace unimask::nk
