#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unimask/kinematics/rotation.hpp"

namespace unimask::kin {

struct Joint {
  std::string name;
  int parent = -1;  // -1 for the root
  Vec3 offset = Vec3::Zero();
};

// Joint tree in topological order: exactly one root at index 0 and every
// parent index smaller than its child's.
class SkeletonTopology {
 public:
  SkeletonTopology() = default;
  // Validates; throws ContractError on a malformed tree.
  SkeletonTopology(std::string name, std::vector<Joint> joints);

  const std::string& name() const { return name_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const Joint& joint(std::size_t i) const { return joints_.at(i); }
  std::size_t size() const { return joints_.size(); }
  std::optional<std::size_t> find(const std::string& joint_name) const;
  bool has_offsets() const;

 private:
  std::string name_;
  std::vector<Joint> joints_;
};

// LaFAN1-style 22-joint skeleton (y up, metres): hips, two 4-joint legs,
// a 5-joint spine/head chain and two 4-joint arms hanging off spine2.
const SkeletonTopology& default_topology();

// Global positions from local rotations. `local_rotations` holds T*J
// quaternions frame-major and `root_translation` T entries; the root sits at
// root_translation + offset(root). Returns T*J*3 values.
std::vector<double> forward_kinematics(const SkeletonTopology& topology,
                                       const std::vector<Quaternion>& local_rotations,
                                       const std::vector<Vec3>& root_translation);

}  // namespace unimask::kin
