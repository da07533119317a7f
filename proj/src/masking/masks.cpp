#include "unimask/masking/masks.hpp"

#include <random>
#include <string>

#include "unimask/error.hpp"

namespace unimask::masking {

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError(std::string(what) + " must lie in [0, 1], got " +
                         std::to_string(p));
  }
}

void check_observed(std::size_t frames, std::size_t observed) {
  if (observed < 1 || observed >= frames) {
    throw ParameterError("observed frames must satisfy 1 <= T_obs < T (T_obs=" +
                         std::to_string(observed) + ", T=" + std::to_string(frames) +
                         ")");
  }
}

}  // namespace

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::kForecast: return "forecast";
    case MaskKind::kInbetween: return "inbetween";
    case MaskKind::kCompletion: return "completion";
    case MaskKind::kOcclusion: return "occlusion";
    case MaskKind::kCustom: return "custom";
  }
  return "?";
}

MaskKind parse_mask_kind(std::string_view text) {
  if (text == "forecast") return MaskKind::kForecast;
  if (text == "inbetween") return MaskKind::kInbetween;
  if (text == "completion") return MaskKind::kCompletion;
  if (text == "occlusion") return MaskKind::kOcclusion;
  if (text == "custom") return MaskKind::kCustom;
  throw ParameterError("unknown mask kind '" + std::string(text) + "'");
}

std::size_t MaskSpec::window_frames(std::size_t frames) const {
  return kind == MaskKind::kInbetween ? past + transition + future : frames;
}

double unit_uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

VisibilityMask gen_forecast_mask(std::size_t frames, std::size_t observed,
                                 std::size_t joints) {
  check_observed(frames, observed);
  VisibilityMask m(frames, joints, false);
  for (std::size_t t = 0; t < observed; ++t) {
    for (std::size_t j = 0; j < joints; ++j) m.set(t, j, true);
  }
  return m;
}

VisibilityMask gen_inbetween_mask(std::size_t frames, std::size_t past,
                                  std::size_t transition, std::size_t future,
                                  std::size_t joints) {
  if (past + transition + future != frames) {
    throw ParameterError("inbetween: past + transition + future = " +
                         std::to_string(past + transition + future) +
                         " but T = " + std::to_string(frames));
  }
  if (past < 1 || transition < 1) {
    throw ParameterError("inbetween needs at least one past and one hidden frame");
  }
  VisibilityMask m(frames, joints, true);
  for (std::size_t t = past; t < past + transition; ++t) {
    for (std::size_t j = 0; j < joints; ++j) m.set(t, j, false);
  }
  return m;
}

VisibilityMask gen_completion_mask(std::size_t frames, std::size_t observed,
                                   const model::PatchScheme& scheme, double p_m,
                                   std::uint64_t seed) {
  check_observed(frames, observed);
  check_probability(p_m, "completion probability");
  std::mt19937_64 rng(seed);
  VisibilityMask m(frames, scheme.joint_count(), true);
  for (std::size_t t = observed; t < frames; ++t) {
    for (const auto& group : scheme.groups()) {
      if (unit_uniform(rng()) < p_m) {
        for (auto j : group) m.set(t, j, false);
      }
    }
  }
  return m;
}

VisibilityMask gen_occlusion_mask(std::size_t frames, std::size_t observed,
                                  std::size_t joints, double p, std::uint64_t seed) {
  check_observed(frames, observed);
  check_probability(p, "occlusion probability");
  std::mt19937_64 rng(seed);
  VisibilityMask m = gen_forecast_mask(frames, observed, joints);
  for (std::size_t t = 0; t < observed; ++t) {
    for (std::size_t j = 0; j < joints; ++j) {
      if (unit_uniform(rng()) < p) m.set(t, j, false);
    }
  }
  return m;
}

TokenMask patchify_mask(const VisibilityMask& visibility,
                        const model::PatchScheme& scheme) {
  if (visibility.joints != scheme.joint_count()) {
    throw ContractError("patchify_mask: mask has " + std::to_string(visibility.joints) +
                        " joints, scheme covers " +
                        std::to_string(scheme.joint_count()));
  }
  TokenMask tokens;
  tokens.frames = visibility.frames;
  tokens.patches = scheme.patch_count();
  tokens.flags.assign(tokens.frames * tokens.patches, 1);
  for (std::size_t t = 0; t < tokens.frames; ++t) {
    for (std::size_t l = 0; l < tokens.patches; ++l) {
      for (auto j : scheme.groups()[l]) {
        if (!visibility.visible(t, j)) {
          tokens.flags[t * tokens.patches + l] = 0;
          break;
        }
      }
    }
  }
  return tokens;
}

double curriculum_p(std::size_t step, std::size_t total_steps, double p_start,
                    double p_end) {
  check_probability(p_start, "curriculum p_start");
  check_probability(p_end, "curriculum p_end");
  if (p_start > p_end) throw ParameterError("curriculum needs p_start <= p_end");
  if (step > total_steps) throw ParameterError("curriculum step beyond total");
  if (total_steps == 0) return p_end;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return p_start + (p_end - p_start) * frac;
}

VisibilityMask make_mask(const MaskSpec& spec, std::size_t frames,
                         const model::PatchScheme& scheme, std::uint64_t seed) {
  const std::size_t joints = scheme.joint_count();
  switch (spec.kind) {
    case MaskKind::kForecast:
      return gen_forecast_mask(frames, spec.observed, joints);
    case MaskKind::kInbetween:
      return gen_inbetween_mask(frames, spec.past, spec.transition, spec.future, joints);
    case MaskKind::kCompletion:
      return gen_completion_mask(frames, spec.observed, scheme, spec.probability, seed);
    case MaskKind::kOcclusion:
      return gen_occlusion_mask(frames, spec.observed, joints, spec.probability, seed);
    case MaskKind::kCustom:
      if (!spec.custom || spec.custom->frames != frames ||
          spec.custom->joints != joints) {
        throw ParameterError("custom mask missing or not T x J");
      }
      return *spec.custom;
  }
  throw ParameterError("unhandled mask kind");
}

}  // namespace unimask::masking
