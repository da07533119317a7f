#include "unimask/kinematics/motion.hpp"

#include <algorithm>
#include <string>

#include "unimask/error.hpp"

namespace unimask::kin {

std::size_t channels_of(Representation repr) {
  return repr == Representation::kPosition3 ? 3 : 6;
}

std::string_view to_string(Representation repr) {
  return repr == Representation::kPosition3 ? "position3" : "ortho6d";
}

Representation parse_representation(std::string_view text) {
  if (text == "position3") return Representation::kPosition3;
  if (text == "ortho6d") return Representation::kOrtho6d;
  throw ParameterError("unknown representation '" + std::string(text) + "'");
}

std::size_t VisibilityMask::hidden_count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 0));
}

MotionTensor MotionTensor::zeros(std::size_t frames, std::size_t joints,
                                 Representation repr, double frame_rate) {
  MotionTensor m;
  m.frames = frames;
  m.joints = joints;
  m.repr = repr;
  m.frame_rate = frame_rate;
  m.values.assign(frames * joints * channels_of(repr), 0.0);
  m.visibility = VisibilityMask(frames, joints, true);
  return m;
}

void MotionTensor::validate() const {
  if (frames < 1 || joints < 1) throw ContractError("motion needs T >= 1 and J >= 1");
  if (values.size() != frames * joints * channels()) {
    throw ContractError("motion payload has " + std::to_string(values.size()) +
                        " values, expected " +
                        std::to_string(frames * joints * channels()));
  }
  if (visibility.frames != frames || visibility.joints != joints ||
      visibility.flags.size() != frames * joints) {
    throw ContractError("motion visibility does not match T x J");
  }
  if (root_translation && root_translation->size() != frames * 3) {
    throw ContractError("root translation must hold T x 3 values");
  }
}

Quaternion joint_quaternion(const MotionTensor& m, std::size_t t, std::size_t j) {
  if (m.repr != Representation::kOrtho6d) {
    throw ContractError("joint_quaternion needs ortho-6D data");
  }
  const double* p = m.values.data() + (t * m.joints + j) * 6;
  return matrix_to_quaternion(rot6d_to_matrix(std::span<const double, 6>(p, 6)));
}

MotionTensor to_positions(const SkeletonTopology& topology, const MotionTensor& m) {
  if (m.repr == Representation::kPosition3) return m;
  if (topology.size() != m.joints) {
    throw ContractError("topology has " + std::to_string(topology.size()) +
                        " joints, motion has " + std::to_string(m.joints));
  }
  std::vector<Quaternion> rotations(m.frames * m.joints);
  for (std::size_t t = 0; t < m.frames; ++t) {
    for (std::size_t j = 0; j < m.joints; ++j) {
      rotations[t * m.joints + j] = joint_quaternion(m, t, j);
    }
  }
  std::vector<Vec3> root(m.frames, Vec3::Zero());
  if (m.root_translation) {
    for (std::size_t t = 0; t < m.frames; ++t) {
      root[t] = Vec3((*m.root_translation)[t * 3], (*m.root_translation)[t * 3 + 1],
                     (*m.root_translation)[t * 3 + 2]);
    }
  }
  MotionTensor out = MotionTensor::zeros(m.frames, m.joints,
                                         Representation::kPosition3, m.frame_rate);
  out.values = forward_kinematics(topology, rotations, root);
  out.visibility = m.visibility;
  return out;
}

}  // namespace unimask::kin
