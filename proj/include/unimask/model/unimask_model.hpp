#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "unimask/kinematics/motion.hpp"
#include "unimask/kinematics/skeleton.hpp"
#include "unimask/masking/masks.hpp"
#include "unimask/model/config.hpp"
#include "unimask/model/layers.hpp"
#include "unimask/model/patch_scheme.hpp"
#include "unimask/numkit/tensor.hpp"
#include "unimask/pipeline/conditioning.hpp"

namespace unimask::model {

// Network inputs of one batch. Features use the flat layout of
// pipeline::to_features; every sample shares T and the feature width F.
struct PreparedBatch {
  std::size_t batch = 0;
  std::size_t frames = 0;
  std::size_t features = 0;
  nk::Tensor input;      // [B, T, F] anchored and standardized x_fill
  nk::Tensor reference;  // [B, T, F] x_ref
  std::vector<masking::TokenMask> token_masks;
  std::vector<pipeline::FilledMotion> filled;
};

class UnimaskModel {
 public:
  // Validates the config; throws ConfigError.
  explicit UnimaskModel(ModelConfig config,
                        kin::SkeletonTopology topology = kin::default_topology());

  const ModelConfig& config() const { return config_; }
  const kin::SkeletonTopology& topology() const { return topology_; }
  const PatchScheme& scheme() const { return scheme_; }
  std::size_t width() const { return config_.model_width(); }
  std::size_t feature_dim() const { return features_; }

  std::vector<NamedParameter>& parameters() { return registry_.entries(); }
  const std::vector<NamedParameter>& parameters() const { return registry_.entries(); }
  nk::Tensor& parameter(const std::string& name);
  std::size_t parameter_count() const;

  // Per-feature standardization applied to the (root-anchored) input and
  // undone on the output delta.
  const std::vector<double>& norm_mean() const { return norm_mean_; }
  const std::vector<double>& norm_std() const { return norm_std_; }
  void set_normalizer(std::vector<double> mean, std::vector<double> stddev);
  // Fits mean / std over every frame of the given motions.
  void fit_normalizer(std::span<const kin::MotionTensor> motions);
  // Feature vector with positional channels made relative to the frame-0
  // root position.
  std::vector<double> anchored_features(const kin::MotionTensor& m) const;

  PreparedBatch prepare(std::span<const kin::MotionTensor> batch,
                        pipeline::FillStrategy fill = pipeline::FillStrategy::kInterpolate) const;

  // Y = network delta + x_ref as a [B, T, F] tensor, before any overwrite of
  // observed entries. Differentiable w.r.t. the parameters.
  nk::Tensor forward(const PreparedBatch& batch) const;
  // The denormalized network output alone (Y - x_ref).
  nk::Tensor forward_delta(const PreparedBatch& batch) const;

  // Inference without gradient recording; observed entries are overwritten
  // when the config asks for it.
  std::vector<kin::MotionTensor> predict(std::span<const kin::MotionTensor> batch) const;

  // ---- stages ----------------------------------------------------------
  // [B, T, F] -> L tensors [B, T, |patch l columns|].
  std::vector<nk::Tensor> pose_decompose(const nk::Tensor& features) const;
  // Inverse of pose_decompose.
  nk::Tensor regroup(const std::vector<nk::Tensor>& patches) const;
  // Per-patch linear maps; [B, T*L, D] frame-major tokens.
  nk::Tensor project_tokens(const std::vector<nk::Tensor>& patches) const;
  // emb_pos(t) + emb_kin(l) + emb_mask for hidden tokens; [B, T*L, D].
  nk::Tensor mixed_embedding(const std::vector<masking::TokenMask>& masks) const;
  nk::Tensor add_mixed_embeddings(const nk::Tensor& tokens,
                                  const std::vector<masking::TokenMask>& masks) const;
  // Encoder, re-add emb_mix, decoder. Input and output [B, T*L, D].
  nk::Tensor encode_decode(const nk::Tensor& tokens, const nk::Tensor& emb_mix) const;
  // [B, T*L, D] -> [B, T, D].
  nk::Tensor pose_aggregate(const nk::Tensor& decoded) const;
  // [B, T, D] -> [B, T, D], residual blocks mixing the time axis.
  nk::Tensor temp_mlp_refine(const nk::Tensor& pose) const;
  // Normalized delta [B, T, F] from aggregated poses (use_pa) or directly
  // from decoded tokens.
  nk::Tensor output_projection(const nk::Tensor& x) const;

  // Causal attention pattern over T*L frame-major tokens.
  std::vector<unsigned char> causal_pattern(std::size_t frames) const;

 private:
  ModelConfig config_;
  kin::SkeletonTopology topology_;
  PatchScheme scheme_;
  std::size_t features_ = 0;
  std::vector<std::vector<std::size_t>> columns_;
  std::vector<std::size_t> inverse_columns_;
  std::vector<double> norm_mean_;
  std::vector<double> norm_std_;

  ParameterRegistry registry_;
  std::vector<Linear> patch_embed_;
  nk::Tensor emb_kin_;
  nk::Tensor emb_mask_;
  std::vector<TransformerBlock> encoder_;
  LayerNorm encoder_norm_;
  std::vector<TransformerBlock> decoder_;
  LayerNorm decoder_norm_;
  Linear pa_fc1_;
  Linear pa_fc2_;
  std::vector<LayerNorm> temp_norm_;
  std::vector<Linear> temp_fc_;
  Linear head_;
  std::vector<Linear> patch_heads_;
};

}  // namespace unimask::model
