#pragma once

#include <cstddef>
#include <vector>

#include "unimask/numkit/tensor.hpp"

// Differentiable primitives. Binary elementwise ops broadcast numpy-style;
// every op records its backward rule when any input requires grad and the
// thread is not inside a NoGradGuard.
namespace unimask::nk {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }

// [..., M, K] x [..., K, N] -> [..., M, N]; batch dims broadcast. A rank-1
// operand is not accepted.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
// Swaps two axes (negative axes allowed).
Tensor transpose(const Tensor& x, int axis0, int axis1);
// Half-open range [start, end) along `axis`.
Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t end);
Tensor concat(const std::vector<Tensor>& parts, int axis);
// Inserts a new axis at `axis` of the (common) input shape.
Tensor stack(const std::vector<Tensor>& parts, int axis);
// Picks `indices` along `axis`; duplicates allowed, gradients scatter-add.
Tensor gather(const Tensor& x, int axis, const std::vector<std::size_t>& indices);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis, bool keepdim);
Tensor mean(const Tensor& x);

// Softmax along `axis` with max subtraction. When `allowed` is non-empty it
// has the shape of `x` (broadcast over leading dims allowed as a suffix) and
// entries with allowed == 0 get probability exactly 0.
Tensor softmax(const Tensor& x, int axis);
Tensor masked_softmax(const Tensor& x, const std::vector<unsigned char>& allowed);

inline constexpr double kLayerNormEps = 1e-5;

// Normalizes over the last axis, then gamma * x_hat + beta with gamma and
// beta of shape [last].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

// Exact erf form x * Phi(x).
Tensor gelu(const Tensor& x);

}  // namespace unimask::nk
