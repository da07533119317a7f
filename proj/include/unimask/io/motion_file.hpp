#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "unimask/kinematics/motion.hpp"

// Motion files are JSON documents:
//
//   {"version": 1, "topology": "default22", "frame_rate": 25.0,
//    "repr": "position3", "T": 64, "J": 22, "n": 3,
//    "values": [[J*n values of frame 0], ...],
//    "visibility": [[J flags of frame 0], ...],      optional
//    "root_translation": [[x, y, z] of frame 0, ...]} optional
//
// Doubles are written with round-trip precision, so write then read is
// bit-exact.
namespace unimask::io {

inline constexpr int kMotionFileVersion = 1;

struct MotionFile {
  std::string topology = "default22";
  kin::MotionTensor motion;
};

nlohmann::json motion_to_json(const MotionFile& file);
// Throws DataError on a malformed or inconsistent document.
MotionFile motion_from_json(const nlohmann::json& j);

void write_motion_file(const std::filesystem::path& path, const MotionFile& file);
MotionFile read_motion_file(const std::filesystem::path& path);

// Every *.json motion in `dir`, sorted by file name.
std::vector<std::filesystem::path> list_motion_files(const std::filesystem::path& dir);

}  // namespace unimask::io
