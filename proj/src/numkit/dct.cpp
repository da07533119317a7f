#include "unimask/numkit/dct.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "unimask/error.hpp"
#include "unimask/numkit/ops.hpp"

namespace unimask::nk {

Tensor dct_matrix(std::size_t frames) {
  if (frames == 0) throw ParameterError("dct_matrix needs at least one frame");
  const double t_len = static_cast<double>(frames);
  std::vector<double> c(frames * frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / t_len) : std::sqrt(2.0 / t_len);
    for (std::size_t t = 0; t < frames; ++t) {
      c[k * frames + t] =
          s * std::cos(std::numbers::pi * (static_cast<double>(t) + 0.5) *
                       static_cast<double>(k) / t_len);
    }
  }
  return Tensor::constant({frames, frames}, std::move(c));
}

Tensor dct_apply(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("dct_apply needs [..., T, C]");
  return matmul(dct_matrix(x.dim(-2)), x);
}

Tensor idct_apply(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("idct_apply needs [..., T, C]");
  return matmul(transpose(dct_matrix(x.dim(-2)), 0, 1), x);
}

}  // namespace unimask::nk
