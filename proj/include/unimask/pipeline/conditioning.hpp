#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "unimask/kinematics/motion.hpp"
#include "unimask/model/patch_scheme.hpp"

// Input conditioning around the network: masked-motion filling, the
// reference motion, the delta output rule and optional DCT wrapping.
namespace unimask::pipeline {

using kin::MotionTensor;
using kin::VisibilityMask;

enum class FillStrategy { kInterpolate, kRepeatLast };

struct FilledMotion {
  MotionTensor x_fill;
  MotionTensor x_ref;
  VisibilityMask visibility;
};

// Per joint channel: hidden frames between two visible ones are linearly
// interpolated (positions, root translation) or SLERPed (ortho-6D); frames
// after the last visible one hold it; frames before the first visible one
// take it. kRepeatLast holds the last visible value everywhere. Throws
// UnfillableChannelError for a joint with no visible frame.
FilledMotion fill_motion(const MotionTensor& x, FillStrategy strategy);

// The reference motion; equal to x_fill.
MotionTensor build_reference(const FilledMotion& filled);

// prediction = net_output + x_ref. With `overwrite_observed`, entries visible
// in `observed` take its ground-truth values.
MotionTensor apply_delta(const MotionTensor& net_output, const MotionTensor& x_ref,
                         const MotionTensor& observed, bool overwrite_observed = true);

// Orthonormal DCT along time of every feature channel; [T, C] row-major.
std::vector<double> dct_wrap(std::span<const double> time_major, std::size_t frames);
std::vector<double> idct_unwrap(std::span<const double> freq_major, std::size_t frames);

// ---- flat feature layout -------------------------------------------------
// Per frame: J * n joint channels followed by 3 root-translation channels
// when the motion carries them.

std::size_t feature_dim(const MotionTensor& m);
std::vector<double> to_features(const MotionTensor& m);
void from_features(std::span<const double> features, MotionTensor& into);
// 1 where the channel's joint is visible (root translation follows joint 0).
std::vector<unsigned char> feature_visibility(const MotionTensor& m);

// Feature columns of each patch in patch order; a patch holding joint 0 also
// owns the root-translation channels.
std::vector<std::vector<std::size_t>> patch_columns(const model::PatchScheme& scheme,
                                                    std::size_t channels,
                                                    bool has_root_translation);

}  // namespace unimask::pipeline
