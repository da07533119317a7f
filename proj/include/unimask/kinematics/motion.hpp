#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unimask/kinematics/rotation.hpp"
#include "unimask/kinematics/skeleton.hpp"

namespace unimask::kin {

enum class Representation { kPosition3, kOrtho6d };

std::size_t channels_of(Representation repr);
std::string_view to_string(Representation repr);
Representation parse_representation(std::string_view text);

// Per (frame, joint) visibility; 1 = observed, 0 = to be reconstructed.
struct VisibilityMask {
  std::size_t frames = 0;
  std::size_t joints = 0;
  std::vector<unsigned char> flags;

  VisibilityMask() = default;
  VisibilityMask(std::size_t frames, std::size_t joints, bool visible = true)
      : frames(frames), joints(joints), flags(frames * joints, visible ? 1 : 0) {}

  bool visible(std::size_t t, std::size_t j) const { return flags[t * joints + j] != 0; }
  void set(std::size_t t, std::size_t j, bool v) { flags[t * joints + j] = v ? 1 : 0; }
  std::size_t hidden_count() const;
  bool all_visible() const { return hidden_count() == 0; }
  bool operator==(const VisibilityMask&) const = default;
};

// T x J x n joint values with their visibility. Rotation data (ortho-6D)
// optionally carries the root translation (T x 3) needed for FK.
struct MotionTensor {
  std::size_t frames = 0;
  std::size_t joints = 0;
  Representation repr = Representation::kPosition3;
  double frame_rate = 30.0;
  std::vector<double> values;
  std::optional<std::vector<double>> root_translation;
  VisibilityMask visibility;

  static MotionTensor zeros(std::size_t frames, std::size_t joints,
                            Representation repr, double frame_rate = 30.0);

  std::size_t channels() const { return channels_of(repr); }
  // Flattened pose width P = J * n.
  std::size_t pose_dim() const { return joints * channels(); }
  double& at(std::size_t t, std::size_t j, std::size_t c) {
    return values[(t * joints + j) * channels() + c];
  }
  double at(std::size_t t, std::size_t j, std::size_t c) const {
    return values[(t * joints + j) * channels() + c];
  }
  // Throws ContractError when sizes disagree.
  void validate() const;
};

// Ortho-6D values of one frame/joint as a quaternion.
Quaternion joint_quaternion(const MotionTensor& m, std::size_t t, std::size_t j);

// FK-resolved positions (same T, J, visibility) of a rotation motion; a
// position motion is returned unchanged.
MotionTensor to_positions(const SkeletonTopology& topology, const MotionTensor& m);

}  // namespace unimask::kin
