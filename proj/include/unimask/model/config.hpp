#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "unimask/kinematics/motion.hpp"
#include "unimask/kinematics/skeleton.hpp"
#include "unimask/model/patch_scheme.hpp"

namespace unimask::model {

struct ModelConfig {
  // Token width D before the `light` halving.
  std::size_t width = 64;
  std::size_t encoder_depth = 2;
  std::size_t decoder_depth = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  // Hidden width of the first aggregation layer; 0 means D.
  std::size_t pa_hidden = 0;

  bool use_pd = true;  // false forces the whole-body (S2) scheme
  bool use_pa = true;  // false selects per-patch output heads
  bool use_dct = false;
  bool use_temp_mlp = false;
  std::size_t temp_mlp_blocks = 2;
  bool use_emb_kin = true;
  bool causal_attention = false;
  bool encoder_only = false;  // "without decoder"
  bool decoder_only = false;  // "without encoder"
  bool light = false;
  bool overwrite_observed = true;

  PatchVariant patch_variant = PatchVariant::kFiveParts;
  std::vector<std::vector<std::size_t>> custom_groups;
  std::vector<std::string> custom_group_names;

  kin::Representation repr = kin::Representation::kPosition3;
  bool root_translation = false;  // extra 3 channels (rotation data)
  // Window length; only the temporal MLP depends on it (0 = any).
  std::size_t frames = 0;

  double init_std = 0.02;
  std::uint64_t init_seed = 0;

  std::size_t model_width() const { return light ? width / 2 : width; }
  std::size_t aggregation_hidden() const { return pa_hidden ? pa_hidden : model_width(); }
  bool has_encoder() const { return !decoder_only && encoder_depth > 0; }
  bool has_decoder() const { return !encoder_only && decoder_depth > 0; }
  // Throws ConfigError on inconsistent settings.
  void validate() const;
};

PatchScheme make_scheme(const ModelConfig& config, const kin::SkeletonTopology& topology);

nlohmann::json to_json(const ModelConfig& config);
// Unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const kin::SkeletonTopology& topology);
kin::SkeletonTopology topology_from_json(const nlohmann::json& j);

}  // namespace unimask::model
