#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "unimask/kinematics/motion.hpp"
#include "unimask/kinematics/rotation.hpp"

// Evaluation metrics and the classical baselines. Errors are in the units
// of the motions; reports scale MPJPE to millimetres.
namespace unimask::metrics {

using kin::MotionTensor;

// Half-open frame interval; end == 0 means "to the last frame".
struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// 80, 160, 320, 400, 560 and 1000 ms.
std::vector<double> default_horizons_ms();

// Frame index of each horizon counted from `first_hidden` (the first
// predicted frame is horizon 1 / fps): first_hidden + round(ms * fps / 1000) - 1.
std::vector<std::size_t> horizon_frames(std::span<const double> horizons_ms, double fps,
                                        std::size_t first_hidden);

// Per horizon frame: mean over samples and joints of the Euclidean distance.
// Both sides must be position motions of equal shape; throws ContractError.
std::vector<double> mpjpe(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth,
                          std::span<const std::size_t> frames);

// Mean Euclidean distance over the (frame, joint) entries hidden in truth's
// visibility. Throws DegeneracyError when nothing is hidden.
double mpjpe_hidden(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth);

// Per-dimension statistics of global positions (J * 3 values per frame).
struct PositionStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Over every frame of the given position motions; a zero deviation becomes 1.
PositionStats position_stats(std::span<const MotionTensor> motions);

// Mean over samples and the frames in `range` of the L2 norm of the
// standardized per-frame position difference.
double l2p(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth,
           const PositionStats& stats, FrameRange range = {});

// Quaternions laid out [sample][frame][joint]. Each pred quaternion is
// aligned to the hemisphere of its truth counterpart; the result is the mean
// over samples and frames of the norm of the concatenated per-frame
// difference. Throws ContractError for quaternions off unit norm by > 1e-6.
double l2q(std::span<const kin::Quaternion> pred, std::span<const kin::Quaternion> truth,
           std::size_t samples, std::size_t frames, std::size_t joints);

// Ortho-6D motions, restricted to `range`.
double l2q(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth,
           FrameRange range = {});

struct NpssResult {
  double value = 0.0;
  std::size_t skipped = 0;  // ground-truth features with zero power
};

// Series laid out [sample][frame][feature]. Per (sample, feature): one-sided
// power spectrum |DFT|^2 normalized to unit sum, earth mover's distance as the
// L1 distance of the cumulative sums, averaged with ground-truth total power
// as the weight.
NpssResult npss(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                std::size_t frames, std::size_t features);

// Quaternion components (kept sign-continuous over time) for ortho-6D
// motions, raw coordinates for position motions.
NpssResult npss(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth,
                FrameRange range = {});

// Each hidden entry holds the joint's last visible value.
MotionTensor baseline_zero_velocity(const MotionTensor& x);
// Linear (positions) / SLERP (rotations) between visible frames.
MotionTensor baseline_interpolation(const MotionTensor& x);

}  // namespace unimask::metrics
