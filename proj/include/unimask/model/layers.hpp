#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "unimask/numkit/tensor.hpp"

namespace unimask::model {

struct NamedParameter {
  std::string name;
  nk::Tensor tensor;
};

// Owns creation order and initialization of every trainable tensor.
class ParameterRegistry {
 public:
  ParameterRegistry(double init_std, std::uint64_t seed) : std_(init_std), rng_(seed) {}

  // Truncated normal (cut at two standard deviations).
  nk::Tensor normal(const std::string& name, nk::Shape shape);
  nk::Tensor zeros(const std::string& name, nk::Shape shape);
  nk::Tensor ones(const std::string& name, nk::Shape shape);

  std::vector<NamedParameter>& entries() { return entries_; }
  const std::vector<NamedParameter>& entries() const { return entries_; }

 private:
  nk::Tensor add(const std::string& name, nk::Shape shape, std::vector<double> values);

  double std_;
  std::mt19937_64 rng_;
  std::vector<NamedParameter> entries_;
};

// y = x W + b with W stored [in, out].
struct Linear {
  nk::Tensor weight;
  nk::Tensor bias;

  Linear() = default;
  Linear(ParameterRegistry& reg, const std::string& name, std::size_t in, std::size_t out,
         bool zero_init = false);
  nk::Tensor operator()(const nk::Tensor& x) const;
};

struct LayerNorm {
  nk::Tensor gamma;
  nk::Tensor beta;

  LayerNorm() = default;
  LayerNorm(ParameterRegistry& reg, const std::string& name, std::size_t dim);
  nk::Tensor operator()(const nk::Tensor& x) const;
};

// Pre-norm block: x + MHSA(LN(x)), then x + MLP(LN(x)) with a GELU MLP.
struct TransformerBlock {
  std::size_t heads = 1;
  LayerNorm norm1;
  Linear qkv;  // D -> 3D: queries, keys, values
  Linear proj;
  LayerNorm norm2;
  Linear fc1;
  Linear fc2;

  TransformerBlock() = default;
  TransformerBlock(ParameterRegistry& reg, const std::string& name, std::size_t width,
                   std::size_t heads, std::size_t mlp_ratio);

  // x: [B, N, D]. `allowed` (N*N, row = query) restricts attention when
  // non-null.
  nk::Tensor operator()(const nk::Tensor& x,
                        const std::vector<unsigned char>* allowed = nullptr) const;
  nk::Tensor attention(const nk::Tensor& h,
                       const std::vector<unsigned char>* allowed = nullptr) const;
};

// Standard transformer sinusoid: even dims sin(t / 10000^(2i/D)), odd dims
// the matching cos. Returns T*D values.
std::vector<double> sinusoidal_embedding(std::size_t frames, std::size_t width);

}  // namespace unimask::model
