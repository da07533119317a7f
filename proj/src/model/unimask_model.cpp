#include "unimask/model/unimask_model.hpp"

#include <cmath>
#include <string>

#include "unimask/error.hpp"
#include "unimask/numkit/dct.hpp"
#include "unimask/numkit/ops.hpp"

namespace unimask::model {

namespace {

std::size_t feature_width(const ModelConfig& c, const kin::SkeletonTopology& topo) {
  return topo.size() * kin::channels_of(c.repr) + (c.root_translation ? 3 : 0);
}

}  // namespace

UnimaskModel::UnimaskModel(ModelConfig config, kin::SkeletonTopology topology)
    : config_(std::move(config)),
      topology_(std::move(topology)),
      registry_(config_.init_std, config_.init_seed) {
  config_.validate();
  scheme_ = make_scheme(config_, topology_);
  features_ = feature_width(config_, topology_);
  columns_ = pipeline::patch_columns(scheme_, kin::channels_of(config_.repr),
                                     config_.root_translation);
  inverse_columns_.assign(features_, 0);
  std::size_t pos = 0;
  for (const auto& cols : columns_) {
    for (auto c : cols) inverse_columns_[c] = pos++;
  }
  norm_mean_.assign(features_, 0.0);
  norm_std_.assign(features_, 1.0);

  const std::size_t d = width(), L = scheme_.patch_count();
  for (std::size_t l = 0; l < L; ++l) {
    patch_embed_.emplace_back(registry_, "patch_embed." + std::to_string(l),
                              columns_[l].size(), d);
  }
  if (config_.use_emb_kin) emb_kin_ = registry_.normal("emb_kin", {L, d});
  emb_mask_ = registry_.normal("emb_mask", {d});
  if (config_.has_encoder()) {
    for (std::size_t i = 0; i < config_.encoder_depth; ++i) {
      encoder_.emplace_back(registry_, "encoder.blocks." + std::to_string(i), d,
                            config_.heads, config_.mlp_ratio);
    }
    encoder_norm_ = LayerNorm(registry_, "encoder.norm", d);
  }
  if (config_.has_decoder()) {
    for (std::size_t i = 0; i < config_.decoder_depth; ++i) {
      decoder_.emplace_back(registry_, "decoder.blocks." + std::to_string(i), d,
                            config_.heads, config_.mlp_ratio);
    }
    decoder_norm_ = LayerNorm(registry_, "decoder.norm", d);
  }
  if (config_.use_pa) {
    const std::size_t h = config_.aggregation_hidden();
    pa_fc1_ = Linear(registry_, "pa.fc1", L * d, h);
    pa_fc2_ = Linear(registry_, "pa.fc2", h, d);
    if (config_.use_temp_mlp) {
      for (std::size_t m = 0; m < config_.temp_mlp_blocks; ++m) {
        const std::string name = "temp_mlp." + std::to_string(m);
        temp_norm_.emplace_back(registry_, name + ".norm", config_.frames);
        temp_fc_.emplace_back(registry_, name + ".fc", config_.frames, config_.frames);
      }
    }
    head_ = Linear(registry_, "head", d, features_, true);
  } else {
    for (std::size_t l = 0; l < L; ++l) {
      patch_heads_.emplace_back(registry_, "head." + std::to_string(l), d,
                                columns_[l].size(), true);
    }
  }
}

nk::Tensor& UnimaskModel::parameter(const std::string& name) {
  for (auto& p : registry_.entries()) {
    if (p.name == name) return p.tensor;
  }
  throw ContractError("no parameter named '" + name + "'");
}

std::size_t UnimaskModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : registry_.entries()) n += p.tensor.size();
  return n;
}

void UnimaskModel::set_normalizer(std::vector<double> mean, std::vector<double> stddev) {
  if (mean.size() != features_ || stddev.size() != features_) {
    throw DimensionError("normalizer needs " + std::to_string(features_) + " values");
  }
  for (double s : stddev) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("normalizer std must be positive");
  }
  norm_mean_ = std::move(mean);
  norm_std_ = std::move(stddev);
}

std::vector<double> UnimaskModel::anchored_features(const kin::MotionTensor& m) const {
  std::vector<double> f = pipeline::to_features(m);
  const std::size_t F = features_;
  if (f.size() != m.frames * F) {
    throw DimensionError("motion has " + std::to_string(f.size() / m.frames) +
                         " features per frame, model expects " + std::to_string(F));
  }
  if (m.repr == kin::Representation::kPosition3) {
    const double a[3] = {f[0], f[1], f[2]};
    for (std::size_t t = 0; t < m.frames; ++t) {
      for (std::size_t j = 0; j < m.joints; ++j) {
        for (std::size_t c = 0; c < 3; ++c) f[t * F + j * 3 + c] -= a[c];
      }
    }
  } else if (m.root_translation) {
    const std::size_t p = m.pose_dim();
    const double a[3] = {f[p], f[p + 1], f[p + 2]};
    for (std::size_t t = 0; t < m.frames; ++t) {
      for (std::size_t c = 0; c < 3; ++c) f[t * F + p + c] -= a[c];
    }
  }
  return f;
}

void UnimaskModel::fit_normalizer(std::span<const kin::MotionTensor> motions) {
  const std::size_t F = features_;
  std::vector<double> sum(F, 0.0), sq(F, 0.0);
  std::size_t rows = 0;
  std::vector<std::vector<double>> feats;
  for (const auto& m : motions) {
    feats.push_back(anchored_features(m));
    rows += m.frames;
  }
  if (rows == 0) throw DataError("cannot fit a normalizer on no data");
  for (const auto& f : feats) {
    for (std::size_t i = 0; i < f.size(); ++i) sum[i % F] += f[i];
  }
  std::vector<double> mean(F), stddev(F);
  for (std::size_t c = 0; c < F; ++c) mean[c] = sum[c] / static_cast<double>(rows);
  for (const auto& f : feats) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double d = f[i] - mean[i % F];
      sq[i % F] += d * d;
    }
  }
  for (std::size_t c = 0; c < F; ++c) {
    const double s = std::sqrt(sq[c] / static_cast<double>(rows));
    stddev[c] = s > 1e-6 ? s : 1.0;
  }
  set_normalizer(std::move(mean), std::move(stddev));
}

PreparedBatch UnimaskModel::prepare(std::span<const kin::MotionTensor> batch,
                                    pipeline::FillStrategy fill) const {
  if (batch.empty()) throw ContractError("empty batch");
  PreparedBatch out;
  out.batch = batch.size();
  out.frames = batch[0].frames;
  out.features = features_;
  const std::size_t T = out.frames, F = features_;
  if (config_.use_temp_mlp && T != config_.frames) {
    throw DimensionError("model was built for windows of " + std::to_string(config_.frames) +
                         " frames, got " + std::to_string(T));
  }
  std::vector<double> input, reference;
  input.reserve(out.batch * T * F);
  reference.reserve(out.batch * T * F);
  for (const auto& m : batch) {
    if (m.frames != T) throw DimensionError("batch samples differ in length");
    if (m.joints != topology_.size() || m.repr != config_.repr ||
        m.root_translation.has_value() != config_.root_translation) {
      throw DimensionError("motion layout does not match the model (J=" +
                           std::to_string(m.joints) + ", repr=" +
                           std::string(kin::to_string(m.repr)) + ")");
    }
    auto filled = pipeline::fill_motion(m, fill);
    const auto f = anchored_features(filled.x_fill);
    for (std::size_t i = 0; i < f.size(); ++i) {
      input.push_back((f[i] - norm_mean_[i % F]) / norm_std_[i % F]);
    }
    const auto r = pipeline::to_features(filled.x_ref);
    reference.insert(reference.end(), r.begin(), r.end());
    out.token_masks.push_back(masking::patchify_mask(m.visibility, scheme_));
    out.filled.push_back(std::move(filled));
  }
  out.input = nk::Tensor::constant({out.batch, T, F}, std::move(input));
  out.reference = nk::Tensor::constant({out.batch, T, F}, std::move(reference));
  return out;
}

std::vector<nk::Tensor> UnimaskModel::pose_decompose(const nk::Tensor& features) const {
  std::vector<nk::Tensor> patches;
  patches.reserve(columns_.size());
  for (const auto& cols : columns_) patches.push_back(nk::gather(features, -1, cols));
  return patches;
}

nk::Tensor UnimaskModel::regroup(const std::vector<nk::Tensor>& patches) const {
  return nk::gather(nk::concat(patches, -1), -1, inverse_columns_);
}

nk::Tensor UnimaskModel::project_tokens(const std::vector<nk::Tensor>& patches) const {
  if (patches.size() != patch_embed_.size()) {
    throw DimensionError("expected " + std::to_string(patch_embed_.size()) + " patches");
  }
  std::vector<nk::Tensor> tokens;
  tokens.reserve(patches.size());
  for (std::size_t l = 0; l < patches.size(); ++l) tokens.push_back(patch_embed_[l](patches[l]));
  const nk::Tensor stacked = nk::stack(tokens, 2);  // [B, T, L, D]
  return nk::reshape(stacked, {stacked.dim(0), stacked.dim(1) * patches.size(), width()});
}

nk::Tensor UnimaskModel::mixed_embedding(const std::vector<masking::TokenMask>& masks) const {
  if (masks.empty()) throw ContractError("mixed_embedding needs at least one mask");
  const std::size_t B = masks.size(), T = masks[0].frames, L = scheme_.patch_count(),
                    D = width();
  const auto pos = sinusoidal_embedding(T, D);
  std::vector<double> tiled(T * L * D);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      std::copy_n(pos.begin() + static_cast<std::ptrdiff_t>(t * D), D,
                  tiled.begin() + static_cast<std::ptrdiff_t>((t * L + l) * D));
    }
  }
  nk::Tensor base = nk::Tensor::constant({T, L, D}, std::move(tiled));
  if (config_.use_emb_kin) base = nk::add(base, emb_kin_);
  base = nk::reshape(base, {1, T * L, D});

  std::vector<double> hidden(B * T * L);
  for (std::size_t b = 0; b < B; ++b) {
    if (masks[b].frames != T || masks[b].patches != L) {
      throw DimensionError("token mask does not match T x L");
    }
    for (std::size_t i = 0; i < T * L; ++i) hidden[b * T * L + i] = masks[b].flags[i] ? 0.0 : 1.0;
  }
  const nk::Tensor indicator = nk::Tensor::constant({B, T * L, 1}, std::move(hidden));
  return nk::add(base, nk::mul(indicator, emb_mask_));
}

nk::Tensor UnimaskModel::add_mixed_embeddings(
    const nk::Tensor& tokens, const std::vector<masking::TokenMask>& masks) const {
  return nk::add(tokens, mixed_embedding(masks));
}

std::vector<unsigned char> UnimaskModel::causal_pattern(std::size_t frames) const {
  const std::size_t L = scheme_.patch_count(), N = frames * L;
  std::vector<unsigned char> allowed(N * N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) allowed[i * N + j] = j / L <= i / L ? 1 : 0;
  }
  return allowed;
}

nk::Tensor UnimaskModel::encode_decode(const nk::Tensor& tokens,
                                       const nk::Tensor& emb_mix) const {
  std::vector<unsigned char> pattern;
  if (config_.causal_attention) pattern = causal_pattern(tokens.dim(1) / scheme_.patch_count());
  const std::vector<unsigned char>* allowed = config_.causal_attention ? &pattern : nullptr;
  nk::Tensor h = tokens;
  if (config_.has_encoder()) {
    for (const auto& blk : encoder_) h = blk(h, allowed);
    h = encoder_norm_(h);
  }
  if (config_.has_decoder()) {
    if (config_.has_encoder()) h = nk::add(h, emb_mix);
    for (const auto& blk : decoder_) h = blk(h, allowed);
    h = decoder_norm_(h);
  }
  return h;
}

nk::Tensor UnimaskModel::pose_aggregate(const nk::Tensor& decoded) const {
  const std::size_t L = scheme_.patch_count();
  const nk::Tensor per_frame =
      nk::reshape(decoded, {decoded.dim(0), decoded.dim(1) / L, L * width()});
  return nk::gelu(pa_fc2_(nk::gelu(pa_fc1_(per_frame))));
}

nk::Tensor UnimaskModel::temp_mlp_refine(const nk::Tensor& pose) const {
  nk::Tensor x = nk::transpose(pose, 1, 2);  // [B, D, T]
  for (std::size_t m = 0; m < temp_fc_.size(); ++m) {
    x = nk::add(x, temp_fc_[m](temp_norm_[m](x)));
  }
  return nk::transpose(x, 1, 2);
}

nk::Tensor UnimaskModel::output_projection(const nk::Tensor& x) const {
  if (config_.use_pa) return head_(x);
  const std::size_t L = scheme_.patch_count(), B = x.dim(0), T = x.dim(1) / L, D = width();
  const nk::Tensor grid = nk::reshape(x, {B, T, L, D});
  std::vector<nk::Tensor> parts;
  parts.reserve(L);
  for (std::size_t l = 0; l < L; ++l) {
    parts.push_back(patch_heads_[l](nk::reshape(nk::slice(grid, 2, l, l + 1), {B, T, D})));
  }
  return regroup(parts);
}

nk::Tensor UnimaskModel::forward(const PreparedBatch& batch) const {
  return nk::add(forward_delta(batch), batch.reference);
}

nk::Tensor UnimaskModel::forward_delta(const PreparedBatch& batch) const {
  nk::Tensor x = batch.input;
  if (config_.use_dct) x = nk::dct_apply(x);
  const nk::Tensor emb = mixed_embedding(batch.token_masks);
  const nk::Tensor tokens = nk::add(project_tokens(pose_decompose(x)), emb);
  const nk::Tensor decoded = encode_decode(tokens, emb);
  nk::Tensor out;
  if (config_.use_pa) {
    nk::Tensor pose = pose_aggregate(decoded);
    if (config_.use_temp_mlp) pose = temp_mlp_refine(pose);
    out = output_projection(pose);
  } else {
    out = output_projection(decoded);
  }
  if (config_.use_dct) out = nk::idct_apply(out);
  return nk::mul(out, nk::Tensor::constant({features_}, norm_std_));
}

std::vector<kin::MotionTensor> UnimaskModel::predict(
    std::span<const kin::MotionTensor> batch) const {
  nk::NoGradGuard guard;
  const PreparedBatch prep = prepare(batch);
  const nk::Tensor delta = forward_delta(prep);
  const std::size_t per = prep.frames * features_;
  std::vector<kin::MotionTensor> out;
  out.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ref = prep.filled[b].x_ref;
    const auto first = delta.values().begin() + static_cast<std::ptrdiff_t>(b * per);
    kin::MotionTensor net = ref;
    pipeline::from_features(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(per)),
                            net);
    out.push_back(pipeline::apply_delta(net, ref, batch[b], config_.overwrite_observed));
  }
  return out;
}

}  // namespace unimask::model
