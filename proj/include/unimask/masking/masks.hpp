#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "unimask/kinematics/motion.hpp"
#include "unimask/model/patch_scheme.hpp"

// Visibility patterns that turn every synthesis task into reconstruction.
// Convention: true/1 = visible (observed), false/0 = masked.
namespace unimask::masking {

using kin::VisibilityMask;

enum class MaskKind { kForecast, kInbetween, kCompletion, kOcclusion, kCustom };

std::string_view to_string(MaskKind kind);
MaskKind parse_mask_kind(std::string_view text);

struct MaskSpec {
  MaskKind kind = MaskKind::kForecast;
  // forecast / completion / occlusion: observed prefix length.
  std::size_t observed = 10;
  // inbetween: past keys, hidden transition, future keys.
  std::size_t past = 10;
  std::size_t transition = 15;
  std::size_t future = 1;
  // completion: per-patch hide probability over future frames.
  // occlusion: per-joint hide probability over observed frames.
  double probability = 1.0;
  // kCustom only.
  std::optional<VisibilityMask> custom;

  // Window length implied by an inbetween spec; `frames` otherwise.
  std::size_t window_frames(std::size_t frames) const;
};

// Per-token visibility, L * T flags in frame-major order.
struct TokenMask {
  std::size_t frames = 0;
  std::size_t patches = 0;
  std::vector<unsigned char> flags;

  bool visible(std::size_t t, std::size_t l) const { return flags[t * patches + l] != 0; }
  bool operator==(const TokenMask&) const = default;
};

VisibilityMask gen_forecast_mask(std::size_t frames, std::size_t observed,
                                 std::size_t joints);

// future == 0 is accepted so forecasting is the special case
// gen_inbetween_mask(T, T_obs, T - T_obs, 0).
VisibilityMask gen_inbetween_mask(std::size_t frames, std::size_t past,
                                  std::size_t transition, std::size_t future,
                                  std::size_t joints);

// Frames [0, observed) stay visible; every (frame, patch) after that is
// hidden with probability p_m.
VisibilityMask gen_completion_mask(std::size_t frames, std::size_t observed,
                                   const model::PatchScheme& scheme, double p_m,
                                   std::uint64_t seed);

// Each joint of each observed frame is hidden with probability p; frames
// from `observed` on are hidden entirely.
VisibilityMask gen_occlusion_mask(std::size_t frames, std::size_t observed,
                                  std::size_t joints, double p, std::uint64_t seed);

// A token is visible iff every joint of its patch is visible at that frame.
TokenMask patchify_mask(const VisibilityMask& visibility,
                        const model::PatchScheme& scheme);

// Linear ramp from p_start (step 0) to p_end (step == total_steps).
double curriculum_p(std::size_t step, std::size_t total_steps, double p_start,
                    double p_end);

// Dispatches on spec.kind. `frames` is the window length.
VisibilityMask make_mask(const MaskSpec& spec, std::size_t frames,
                         const model::PatchScheme& scheme, std::uint64_t seed);

// Uniform [0, 1) from a 64-bit draw, identical on every platform.
double unit_uniform(std::uint64_t bits);

}  // namespace unimask::masking
