#include "unimask/kinematics/skeleton.hpp"

#include <string>

#include "unimask/error.hpp"

namespace unimask::kin {

SkeletonTopology::SkeletonTopology(std::string name, std::vector<Joint> joints)
    : name_(std::move(name)), joints_(std::move(joints)) {
  if (joints_.empty()) throw ContractError("topology has no joints");
  if (joints_[0].parent != -1) {
    throw ContractError("topology: joint 0 must be the root");
  }
  for (std::size_t i = 1; i < joints_.size(); ++i) {
    const int p = joints_[i].parent;
    if (p < 0 || static_cast<std::size_t>(p) >= i) {
      throw ContractError("topology: joint '" + joints_[i].name +
                          "' must have a parent preceding it");
    }
  }
}

std::optional<std::size_t> SkeletonTopology::find(const std::string& joint_name) const {
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (joints_[i].name == joint_name) return i;
  }
  return std::nullopt;
}

bool SkeletonTopology::has_offsets() const {
  for (const auto& j : joints_) {
    if (j.offset.squaredNorm() > 0.0) return true;
  }
  return false;
}

const SkeletonTopology& default_topology() {
  static const SkeletonTopology topology = [] {
    std::vector<Joint> j = {
        {"hips", -1, {0.0, 0.0, 0.0}},
        {"left_upleg", 0, {0.10, -0.05, 0.0}},
        {"left_leg", 1, {0.0, -0.42, 0.0}},
        {"left_foot", 2, {0.0, -0.42, 0.0}},
        {"left_toe", 3, {0.0, -0.05, 0.12}},
        {"right_upleg", 0, {-0.10, -0.05, 0.0}},
        {"right_leg", 5, {0.0, -0.42, 0.0}},
        {"right_foot", 6, {0.0, -0.42, 0.0}},
        {"right_toe", 7, {0.0, -0.05, 0.12}},
        {"spine", 0, {0.0, 0.10, 0.0}},
        {"spine1", 9, {0.0, 0.12, 0.0}},
        {"spine2", 10, {0.0, 0.12, 0.0}},
        {"neck", 11, {0.0, 0.15, 0.0}},
        {"head", 12, {0.0, 0.10, 0.0}},
        {"left_shoulder", 11, {0.04, 0.10, 0.0}},
        {"left_arm", 14, {0.12, 0.0, 0.0}},
        {"left_forearm", 15, {0.28, 0.0, 0.0}},
        {"left_hand", 16, {0.25, 0.0, 0.0}},
        {"right_shoulder", 11, {-0.04, 0.10, 0.0}},
        {"right_arm", 18, {-0.12, 0.0, 0.0}},
        {"right_forearm", 19, {-0.28, 0.0, 0.0}},
        {"right_hand", 20, {-0.25, 0.0, 0.0}},
    };
    return SkeletonTopology("default22", std::move(j));
  }();
  return topology;
}

std::vector<double> forward_kinematics(const SkeletonTopology& topology,
                                       const std::vector<Quaternion>& local_rotations,
                                       const std::vector<Vec3>& root_translation) {
  const std::size_t joints = topology.size();
  const std::size_t frames = root_translation.size();
  if (local_rotations.size() != frames * joints) {
    throw DimensionError("forward_kinematics: expected " +
                         std::to_string(frames * joints) + " rotations, got " +
                         std::to_string(local_rotations.size()));
  }
  std::vector<double> out(frames * joints * 3);
  std::vector<Mat3> global(joints);
  std::vector<Vec3> pos(joints);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < joints; ++j) {
      const Joint& joint = topology.joint(j);
      const Mat3 local = local_rotations[t * joints + j].to_matrix();
      if (joint.parent < 0) {
        global[j] = local;
        pos[j] = root_translation[t] + joint.offset;
      } else {
        const auto p = static_cast<std::size_t>(joint.parent);
        global[j] = global[p] * local;
        pos[j] = pos[p] + global[p] * joint.offset;
      }
      for (int c = 0; c < 3; ++c) out[(t * joints + j) * 3 + c] = pos[j][c];
    }
  }
  return out;
}

}  // namespace unimask::kin
