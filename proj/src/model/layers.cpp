#include "unimask/model/layers.hpp"

#include <cmath>

#include "unimask/numkit/ops.hpp"

namespace unimask::model {

nk::Tensor ParameterRegistry::add(const std::string& name, nk::Shape shape,
                                  std::vector<double> values) {
  nk::Tensor t = nk::Tensor::parameter(std::move(shape), std::move(values));
  entries_.push_back({name, t});
  return t;
}

nk::Tensor ParameterRegistry::normal(const std::string& name, nk::Shape shape) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(nk::numel(shape));
  for (auto& x : v) {
    double z;
    do {
      z = dist(rng_);
    } while (std::abs(z) > 2.0);
    x = z * std_;
  }
  return add(name, std::move(shape), std::move(v));
}

nk::Tensor ParameterRegistry::zeros(const std::string& name, nk::Shape shape) {
  const auto n = nk::numel(shape);
  return add(name, std::move(shape), std::vector<double>(n, 0.0));
}

nk::Tensor ParameterRegistry::ones(const std::string& name, nk::Shape shape) {
  const auto n = nk::numel(shape);
  return add(name, std::move(shape), std::vector<double>(n, 1.0));
}

Linear::Linear(ParameterRegistry& reg, const std::string& name, std::size_t in,
               std::size_t out, bool zero_init)
    : weight(zero_init ? reg.zeros(name + ".weight", {in, out})
                       : reg.normal(name + ".weight", {in, out})),
      bias(reg.zeros(name + ".bias", {out})) {}

nk::Tensor Linear::operator()(const nk::Tensor& x) const {
  return nk::add(nk::matmul(x, weight), bias);
}

LayerNorm::LayerNorm(ParameterRegistry& reg, const std::string& name, std::size_t dim)
    : gamma(reg.ones(name + ".gamma", {dim})), beta(reg.zeros(name + ".beta", {dim})) {}

nk::Tensor LayerNorm::operator()(const nk::Tensor& x) const {
  return nk::layer_norm(x, gamma, beta);
}

TransformerBlock::TransformerBlock(ParameterRegistry& reg, const std::string& name,
                                   std::size_t width, std::size_t heads,
                                   std::size_t mlp_ratio)
    : heads(heads),
      norm1(reg, name + ".norm1", width),
      qkv(reg, name + ".attn.qkv", width, 3 * width),
      proj(reg, name + ".attn.proj", width, width),
      norm2(reg, name + ".norm2", width),
      fc1(reg, name + ".mlp.fc1", width, mlp_ratio * width),
      fc2(reg, name + ".mlp.fc2", mlp_ratio * width, width) {}

nk::Tensor TransformerBlock::attention(const nk::Tensor& h,
                                       const std::vector<unsigned char>* allowed) const {
  const std::size_t b = h.dim(0), n = h.dim(1), d = h.dim(2), dh = d / heads;
  const nk::Tensor x = qkv(h);
  auto split = [&](std::size_t part, const std::vector<std::size_t>& order) {
    const nk::Tensor cols = nk::slice(x, -1, part * d, (part + 1) * d);
    return nk::permute(nk::reshape(cols, {b, n, heads, dh}), order);
  };
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const nk::Tensor q = nk::scale(split(0, {0, 2, 1, 3}), inv_sqrt_dh);  // [B, H, N, dh]
  const nk::Tensor kt = split(1, {0, 2, 3, 1});  // [B, H, dh, N]
  const nk::Tensor v = split(2, {0, 2, 1, 3});
  const nk::Tensor scores = nk::matmul(q, kt);  // [B, H, N, N]
  const nk::Tensor probs = allowed ? nk::masked_softmax(scores, *allowed) : nk::softmax(scores, -1);
  const nk::Tensor ctx = nk::reshape(nk::permute(nk::matmul(probs, v), {0, 2, 1, 3}), {b, n, d});
  return proj(ctx);
}

nk::Tensor TransformerBlock::operator()(const nk::Tensor& x,
                                        const std::vector<unsigned char>* allowed) const {
  const nk::Tensor y = nk::add(x, attention(norm1(x), allowed));
  return nk::add(y, fc2(nk::gelu(fc1(norm2(y)))));
}

std::vector<double> sinusoidal_embedding(std::size_t frames, std::size_t width) {
  std::vector<double> out(frames * width);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < width; ++i) {
      const double k = static_cast<double>(i - i % 2);
      const double angle =
          static_cast<double>(t) / std::pow(10000.0, k / static_cast<double>(width));
      out[t * width + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return out;
}

}  // namespace unimask::model
