#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "unimask/kinematics/skeleton.hpp"

namespace unimask::model {

// Body-part granularity of the pose decomposition.
enum class PatchVariant {
  kJoints,           // S1: one patch per joint
  kWholeBody,        // S2: a single patch (no decomposition)
  kFiveParts,        // S3: trunk, two legs, two arms
  kClavicleInTrunk,  // S4: S3 with the shoulders moved into the trunk
  kHipsSeparate,     // S5: S3 with the hips as a sixth patch
  kCustom,
};

std::string_view to_string(PatchVariant v);
// Accepts "S1".."S5" or "custom".
PatchVariant parse_patch_variant(std::string_view text);

// Partition of the joints into L ordered groups. Tokens of one frame follow
// group order; joints inside a group follow their listed order.
class PatchScheme {
 public:
  PatchScheme() = default;
  // S3-S5 look joints up by the default topology's names.
  static PatchScheme make(PatchVariant variant, const kin::SkeletonTopology& topology);
  static PatchScheme custom(std::vector<std::vector<std::size_t>> groups,
                            std::vector<std::string> names, std::size_t joint_count);

  PatchVariant variant() const { return variant_; }
  const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t patch_count() const { return groups_.size(); }
  std::size_t joint_count() const { return joint_count_; }
  // Joints per patch (n_l).
  std::vector<std::size_t> sizes() const;
  std::size_t patch_of(std::size_t joint) const { return patch_of_.at(joint); }

 private:
  PatchScheme(PatchVariant variant, std::vector<std::vector<std::size_t>> groups,
              std::vector<std::string> names, std::size_t joint_count);

  PatchVariant variant_ = PatchVariant::kFiveParts;
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<std::string> names_;
  std::size_t joint_count_ = 0;
  std::vector<std::size_t> patch_of_;
};

}  // namespace unimask::model
