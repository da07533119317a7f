#pragma once

#include <filesystem>
#include <string>

#include "unimask/kinematics/motion.hpp"
#include "unimask/kinematics/skeleton.hpp"

namespace unimask::io {

struct BvhMotion {
  kin::SkeletonTopology topology;
  // Ortho-6D local rotations with the root position channels as root
  // translation; frame rate from "Frame Time".
  kin::MotionTensor motion;
};

// Subset reader: HIERARCHY with ROOT / JOINT / End Site blocks, OFFSET and
// CHANNELS (X/Y/Z position and rotation), then MOTION. Euler channels are
// composed in their declared order. Position channels on non-root joints are
// ignored. End sites are not joints. Throws ParseError with the line number.
BvhMotion parse_bvh(const std::string& text, const std::string& name = "bvh");
BvhMotion read_bvh(const std::filesystem::path& path);

}  // namespace unimask::io
