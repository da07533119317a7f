#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "unimask/io/synthetic.hpp"
#include "unimask/kinematics/motion.hpp"
#include "unimask/kinematics/skeleton.hpp"
#include "unimask/masking/masks.hpp"
#include "unimask/metrics/report.hpp"
#include "unimask/model/config.hpp"
#include "unimask/trainer/trainer.hpp"

namespace unimask::cli {

inline constexpr int kSchemaVersion = 1;

enum class DataKind { kSynthetic, kMotionDir, kBvhDir };

struct DataSource {
  DataKind kind = DataKind::kSynthetic;
  io::SyntheticGaitParams synthetic;  // train split; the test split reuses it
  std::size_t test_count = 50;
  std::filesystem::path train_dir;    // motion_dir / bvh_dir
  std::filesystem::path test_dir;
};

// One experiment. `seed` drives model init, batch sampling and eval masks;
// the synthetic data keeps its own seed.
struct RunConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 0;
  // Empty means the default 22-joint skeleton (or the BVH skeleton).
  std::optional<kin::SkeletonTopology> topology;
  model::ModelConfig model;
  trainer::TrainConfig train;
  // Used by train when the train section lists no phases, and by every
  // listed phase that has no mask of its own.
  bool train_phases_given = false;
  std::vector<bool> phase_mask_given;
  masking::MaskSpec mask;
  metrics::EvalSetup eval;
  DataSource data;
  std::filesystem::path output_dir = "runs/default";
};

// Throws ConfigError; unknown keys are rejected at every level.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

// Command-line values that replace the file's.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mask;
  std::optional<double> p;
  std::optional<std::size_t> transition;
  std::optional<std::filesystem::path> out;
};

void apply_overrides(RunConfig& config, const Overrides& overrides);

struct Dataset {
  kin::SkeletonTopology topology;
  std::vector<kin::MotionTensor> train;
  std::vector<kin::MotionTensor> test;
};

// Throws DataError for missing or inconsistent files.
Dataset load_dataset(const RunConfig& config);

}  // namespace unimask::cli
