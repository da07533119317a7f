#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "unimask/kinematics/motion.hpp"
#include "unimask/kinematics/skeleton.hpp"

namespace unimask::io {

// angle(t) = bias + amplitude * sin(2 pi f t + phase) about one local axis.
struct JointOscillator {
  std::size_t joint = 0;
  int axis = 0;  // 0 = x, 1 = y, 2 = z
  double amplitude_deg = 0.0;
  double frequency_hz = 1.0;
  double phase = 0.0;
  double bias_deg = 0.0;
};

// Procedural walking on the default 22-joint skeleton.
struct SyntheticGaitParams {
  std::vector<JointOscillator> oscillators;  // empty means default_gait(gait_hz)
  double gait_hz = 1.0;
  double root_speed = 1.2;                   // metres per second along +z
  double root_bob = 0.02;                    // vertical amplitude at twice the gait rate
  double noise_std_deg = 0.5;
  double amplitude_jitter = 0.2;  // per-sequence relative scaling range
  double frequency_jitter = 0.1;
  double frame_rate = 25.0;
  std::size_t frames = 64;
  std::size_t count = 200;
  std::uint64_t seed = 1;
  kin::Representation repr = kin::Representation::kPosition3;

  // Throws ConfigError.
  void validate() const;
};

// Legs, arms, spine and hips oscillating at `gait_hz` with walking phases.
std::vector<JointOscillator> default_gait(double gait_hz = 1.0);

nlohmann::json to_json(const SyntheticGaitParams& p);
// Unknown keys are rejected.
SyntheticGaitParams synthetic_params_from_json(const nlohmann::json& j);

// `split` selects a disjoint seed stream (0 = train, 1 = test, ...).
// Position output is FK-resolved; ortho-6D output carries the root
// translation.
std::vector<kin::MotionTensor> generate_gait(const SyntheticGaitParams& params,
                                             std::uint64_t split = 0);

}  // namespace unimask::io
