#include "unimask/model/config.hpp"

#include <set>
#include <string>

#include "unimask/error.hpp"

namespace unimask::model {

using nlohmann::json;

void ModelConfig::validate() const {
  const std::size_t d = model_width();
  if (d == 0) throw ConfigError("model width must be positive");
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("model width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be positive");
  if (encoder_only && decoder_only) {
    throw ConfigError("encoder_only and decoder_only cannot both be set");
  }
  if (!has_encoder() && !has_decoder()) {
    throw ConfigError("model needs at least one encoder or decoder block");
  }
  if (use_temp_mlp && !use_pa) {
    throw ConfigError("the temporal MLP refines aggregated poses and needs use_pa");
  }
  if (use_temp_mlp && frames == 0) {
    throw ConfigError("the temporal MLP needs a fixed window length (frames)");
  }
  if (use_temp_mlp && temp_mlp_blocks == 0) {
    throw ConfigError("use_temp_mlp needs at least one block");
  }
  if (patch_variant == PatchVariant::kCustom && custom_groups.empty()) {
    throw ConfigError("custom patch scheme needs custom_groups");
  }
  if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
  if (root_translation && repr != kin::Representation::kOrtho6d) {
    throw ConfigError("root_translation channels apply to ortho6d data only");
  }
}

PatchScheme make_scheme(const ModelConfig& config, const kin::SkeletonTopology& topology) {
  if (!config.use_pd) return PatchScheme::make(PatchVariant::kWholeBody, topology);
  if (config.patch_variant == PatchVariant::kCustom) {
    std::vector<std::string> names = config.custom_group_names;
    if (names.empty()) {
      for (std::size_t i = 0; i < config.custom_groups.size(); ++i) {
        names.push_back("patch" + std::to_string(i));
      }
    }
    return PatchScheme::custom(config.custom_groups, names, topology.size());
  }
  return PatchScheme::make(config.patch_variant, topology);
}

json to_json(const ModelConfig& c) {
  return json{{"width", c.width},
              {"encoder_depth", c.encoder_depth},
              {"decoder_depth", c.decoder_depth},
              {"heads", c.heads},
              {"mlp_ratio", c.mlp_ratio},
              {"pa_hidden", c.pa_hidden},
              {"use_pd", c.use_pd},
              {"use_pa", c.use_pa},
              {"use_dct", c.use_dct},
              {"use_temp_mlp", c.use_temp_mlp},
              {"temp_mlp_blocks", c.temp_mlp_blocks},
              {"use_emb_kin", c.use_emb_kin},
              {"causal_attention", c.causal_attention},
              {"encoder_only", c.encoder_only},
              {"decoder_only", c.decoder_only},
              {"light", c.light},
              {"overwrite_observed", c.overwrite_observed},
              {"patch_scheme", std::string(to_string(c.patch_variant))},
              {"custom_groups", c.custom_groups},
              {"custom_group_names", c.custom_group_names},
              {"repr", std::string(kin::to_string(c.repr))},
              {"root_translation", c.root_translation},
              {"frames", c.frames},
              {"init_std", c.init_std},
              {"init_seed", c.init_seed}};
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config '") + key + "': " + e.what());
  }
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  static const std::set<std::string> known = {
      "width", "encoder_depth", "decoder_depth", "heads", "mlp_ratio", "pa_hidden",
      "use_pd", "use_pa", "use_dct", "use_temp_mlp", "temp_mlp_blocks", "use_emb_kin",
      "causal_attention", "encoder_only", "decoder_only", "light", "overwrite_observed",
      "patch_scheme", "custom_groups", "custom_group_names", "repr", "root_translation",
      "frames", "init_std", "init_seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown model config key '" + key + "'");
  }
  ModelConfig c;
  read(j, "width", c.width);
  read(j, "encoder_depth", c.encoder_depth);
  read(j, "decoder_depth", c.decoder_depth);
  read(j, "heads", c.heads);
  read(j, "mlp_ratio", c.mlp_ratio);
  read(j, "pa_hidden", c.pa_hidden);
  read(j, "use_pd", c.use_pd);
  read(j, "use_pa", c.use_pa);
  read(j, "use_dct", c.use_dct);
  read(j, "use_temp_mlp", c.use_temp_mlp);
  read(j, "temp_mlp_blocks", c.temp_mlp_blocks);
  read(j, "use_emb_kin", c.use_emb_kin);
  read(j, "causal_attention", c.causal_attention);
  read(j, "encoder_only", c.encoder_only);
  read(j, "decoder_only", c.decoder_only);
  read(j, "light", c.light);
  read(j, "overwrite_observed", c.overwrite_observed);
  read(j, "custom_groups", c.custom_groups);
  read(j, "custom_group_names", c.custom_group_names);
  read(j, "root_translation", c.root_translation);
  read(j, "frames", c.frames);
  read(j, "init_std", c.init_std);
  read(j, "init_seed", c.init_seed);
  try {
    if (j.contains("patch_scheme")) {
      c.patch_variant = parse_patch_variant(j.at("patch_scheme").get<std::string>());
    }
    if (j.contains("repr")) c.repr = kin::parse_representation(j.at("repr").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

json to_json(const kin::SkeletonTopology& topology) {
  json joints = json::array();
  for (const auto& jt : topology.joints()) {
    joints.push_back({{"name", jt.name},
                      {"parent", jt.parent},
                      {"offset", {jt.offset[0], jt.offset[1], jt.offset[2]}}});
  }
  return json{{"name", topology.name()}, {"joints", joints}};
}

kin::SkeletonTopology topology_from_json(const json& j) {
  try {
    std::vector<kin::Joint> joints;
    for (const auto& e : j.at("joints")) {
      kin::Joint jt;
      jt.name = e.at("name").get<std::string>();
      jt.parent = e.at("parent").get<int>();
      const auto off = e.value("offset", std::vector<double>{0.0, 0.0, 0.0});
      if (off.size() != 3) throw ConfigError("joint offset must have 3 values");
      jt.offset = kin::Vec3(off[0], off[1], off[2]);
      joints.push_back(std::move(jt));
    }
    return kin::SkeletonTopology(j.at("name").get<std::string>(), std::move(joints));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("topology: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace unimask::model
