#pragma once

#include <cstddef>

#include "unimask/numkit/tensor.hpp"

namespace unimask::nk {

// Orthonormal DCT-II basis, rows are frequencies: C[k][t] =
// s_k cos(pi (t + 1/2) k / T) with s_0 = sqrt(1/T), s_k = sqrt(2/T).
Tensor dct_matrix(std::size_t frames);

// Transforms along axis -2 of x ([..., T, C]); the inverse uses C^T.
Tensor dct_apply(const Tensor& x);
Tensor idct_apply(const Tensor& x);

}  // namespace unimask::nk
