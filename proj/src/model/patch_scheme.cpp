#include "unimask/model/patch_scheme.hpp"

#include <utility>

#include "unimask/error.hpp"

namespace unimask::model {

std::string_view to_string(PatchVariant v) {
  switch (v) {
    case PatchVariant::kJoints: return "S1";
    case PatchVariant::kWholeBody: return "S2";
    case PatchVariant::kFiveParts: return "S3";
    case PatchVariant::kClavicleInTrunk: return "S4";
    case PatchVariant::kHipsSeparate: return "S5";
    case PatchVariant::kCustom: return "custom";
  }
  return "?";
}

PatchVariant parse_patch_variant(std::string_view text) {
  if (text == "S1") return PatchVariant::kJoints;
  if (text == "S2") return PatchVariant::kWholeBody;
  if (text == "S3") return PatchVariant::kFiveParts;
  if (text == "S4") return PatchVariant::kClavicleInTrunk;
  if (text == "S5") return PatchVariant::kHipsSeparate;
  if (text == "custom") return PatchVariant::kCustom;
  throw ConfigError("unknown patch scheme '" + std::string(text) + "'");
}

PatchScheme::PatchScheme(PatchVariant variant,
                         std::vector<std::vector<std::size_t>> groups,
                         std::vector<std::string> names, std::size_t joint_count)
    : variant_(variant),
      groups_(std::move(groups)),
      names_(std::move(names)),
      joint_count_(joint_count),
      patch_of_(joint_count, joint_count) {
  if (groups_.empty()) throw ConfigError("patch scheme has no groups");
  if (names_.size() != groups_.size()) {
    throw ConfigError("patch scheme needs one name per group");
  }
  for (std::size_t l = 0; l < groups_.size(); ++l) {
    if (groups_[l].empty()) throw ConfigError("patch '" + names_[l] + "' is empty");
    for (auto j : groups_[l]) {
      if (j >= joint_count_) {
        throw ConfigError("patch '" + names_[l] + "' references joint " +
                          std::to_string(j) + " of " + std::to_string(joint_count_));
      }
      if (patch_of_[j] != joint_count_) {
        throw ConfigError("joint " + std::to_string(j) + " belongs to two patches");
      }
      patch_of_[j] = l;
    }
  }
  for (std::size_t j = 0; j < joint_count_; ++j) {
    if (patch_of_[j] == joint_count_) {
      throw ConfigError("joint " + std::to_string(j) + " is in no patch");
    }
  }
}

std::vector<std::size_t> PatchScheme::sizes() const {
  std::vector<std::size_t> s;
  s.reserve(groups_.size());
  for (const auto& g : groups_) s.push_back(g.size());
  return s;
}

PatchScheme PatchScheme::custom(std::vector<std::vector<std::size_t>> groups,
                                std::vector<std::string> names,
                                std::size_t joint_count) {
  return PatchScheme(PatchVariant::kCustom, std::move(groups), std::move(names),
                     joint_count);
}

PatchScheme PatchScheme::make(PatchVariant variant,
                              const kin::SkeletonTopology& topology) {
  const std::size_t joints = topology.size();
  if (variant == PatchVariant::kJoints) {
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < joints; ++j) {
      groups.push_back({j});
      names.push_back(topology.joint(j).name);
    }
    return PatchScheme(variant, std::move(groups), std::move(names), joints);
  }
  if (variant == PatchVariant::kWholeBody) {
    std::vector<std::size_t> all(joints);
    for (std::size_t j = 0; j < joints; ++j) all[j] = j;
    return PatchScheme(variant, {all}, {"body"}, joints);
  }
  if (variant == PatchVariant::kCustom) {
    throw ConfigError("custom patch schemes need explicit groups");
  }

  auto ids = [&](std::initializer_list<const char*> names) {
    std::vector<std::size_t> out;
    for (const char* n : names) {
      const auto j = topology.find(n);
      if (!j) {
        throw ConfigError(std::string("patch scheme ") +
                          std::string(to_string(variant)) + " needs joint '" + n +
                          "' in topology '" + topology.name() + "'");
      }
      out.push_back(*j);
    }
    return out;
  };
  const auto left_leg = ids({"left_upleg", "left_leg", "left_foot", "left_toe"});
  const auto right_leg = ids({"right_upleg", "right_leg", "right_foot", "right_toe"});
  switch (variant) {
    case PatchVariant::kFiveParts:
      return PatchScheme(
          variant,
          {ids({"hips", "spine", "spine1", "spine2", "neck", "head"}), left_leg,
           right_leg, ids({"left_shoulder", "left_arm", "left_forearm", "left_hand"}),
           ids({"right_shoulder", "right_arm", "right_forearm", "right_hand"})},
          {"trunk", "left_leg", "right_leg", "left_arm", "right_arm"}, joints);
    case PatchVariant::kClavicleInTrunk:
      return PatchScheme(
          variant,
          {ids({"hips", "spine", "spine1", "spine2", "neck", "head", "left_shoulder",
                "right_shoulder"}),
           left_leg, right_leg, ids({"left_arm", "left_forearm", "left_hand"}),
           ids({"right_arm", "right_forearm", "right_hand"})},
          {"trunk", "left_leg", "right_leg", "left_arm", "right_arm"}, joints);
    case PatchVariant::kHipsSeparate:
      return PatchScheme(
          variant,
          {ids({"hips"}), ids({"spine", "spine1", "spine2", "neck", "head"}), left_leg,
           right_leg, ids({"left_shoulder", "left_arm", "left_forearm", "left_hand"}),
           ids({"right_shoulder", "right_arm", "right_forearm", "right_hand"})},
          {"hips", "trunk", "left_leg", "right_leg", "left_arm", "right_arm"}, joints);
    default:
      break;
  }
  throw ConfigError("unhandled patch variant");
}

}  // namespace unimask::model
