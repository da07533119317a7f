#include "unimask/pipeline/conditioning.hpp"

#include <algorithm>
#include <string>

#include "unimask/error.hpp"
#include "unimask/numkit/dct.hpp"

namespace unimask::pipeline {

namespace {

// Blend of the joint values at frames a and b into frame t, weight w of b.
void blend_joint(MotionTensor& m, std::size_t j, std::size_t a, std::size_t b,
                 std::size_t t, double w) {
  const std::size_t n = m.channels();
  if (m.repr == kin::Representation::kOrtho6d) {
    const kin::Quaternion qa = kin::joint_quaternion(m, a, j);
    const kin::Quaternion qb = kin::joint_quaternion(m, b, j);
    const kin::Rot6d r = kin::matrix_to_rot6d(kin::slerp(qa, qb, w).to_matrix());
    for (std::size_t c = 0; c < 6; ++c) m.at(t, j, c) = r[c];
  } else {
    for (std::size_t c = 0; c < n; ++c) {
      m.at(t, j, c) = (1.0 - w) * m.at(a, j, c) + w * m.at(b, j, c);
    }
  }
  if (j == 0 && m.root_translation) {
    auto& r = *m.root_translation;
    for (std::size_t c = 0; c < 3; ++c) {
      r[t * 3 + c] = (1.0 - w) * r[a * 3 + c] + w * r[b * 3 + c];
    }
  }
}

void copy_joint(MotionTensor& m, std::size_t j, std::size_t from, std::size_t t) {
  for (std::size_t c = 0; c < m.channels(); ++c) m.at(t, j, c) = m.at(from, j, c);
  if (j == 0 && m.root_translation) {
    auto& r = *m.root_translation;
    for (std::size_t c = 0; c < 3; ++c) r[t * 3 + c] = r[from * 3 + c];
  }
}

}  // namespace

FilledMotion fill_motion(const MotionTensor& x, FillStrategy strategy) {
  x.validate();
  MotionTensor filled = x;
  const auto& vis = x.visibility;
  std::vector<std::size_t> visible_frames;
  for (std::size_t j = 0; j < x.joints; ++j) {
    visible_frames.clear();
    for (std::size_t t = 0; t < x.frames; ++t) {
      if (vis.visible(t, j)) visible_frames.push_back(t);
    }
    if (visible_frames.empty()) {
      throw UnfillableChannelError("joint " + std::to_string(j) +
                                   " has no visible frame to fill from");
    }
    std::size_t k = 0;  // index of the next visible frame at or after t
    for (std::size_t t = 0; t < x.frames; ++t) {
      while (k < visible_frames.size() && visible_frames[k] < t) ++k;
      if (k < visible_frames.size() && visible_frames[k] == t) continue;
      const bool has_prev = k > 0;
      const bool has_next = k < visible_frames.size();
      if (!has_prev) {
        copy_joint(filled, j, visible_frames.front(), t);
      } else if (!has_next || strategy == FillStrategy::kRepeatLast) {
        copy_joint(filled, j, visible_frames[k - 1], t);
      } else {
        const std::size_t a = visible_frames[k - 1], b = visible_frames[k];
        const double w = static_cast<double>(t - a) / static_cast<double>(b - a);
        blend_joint(filled, j, a, b, t, w);
      }
    }
  }
  FilledMotion out;
  out.x_fill = std::move(filled);
  out.visibility = x.visibility;
  out.x_ref = build_reference(out);
  return out;
}

MotionTensor build_reference(const FilledMotion& filled) { return filled.x_fill; }

MotionTensor apply_delta(const MotionTensor& net_output, const MotionTensor& x_ref,
                         const MotionTensor& observed, bool overwrite_observed) {
  if (net_output.values.size() != x_ref.values.size() ||
      net_output.frames != x_ref.frames || net_output.joints != x_ref.joints ||
      net_output.repr != x_ref.repr ||
      net_output.root_translation.has_value() != x_ref.root_translation.has_value()) {
    throw DimensionError("apply_delta: network output and reference differ in shape");
  }
  MotionTensor y = x_ref;
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += net_output.values[i];
  if (y.root_translation) {
    for (std::size_t i = 0; i < y.root_translation->size(); ++i) {
      (*y.root_translation)[i] += (*net_output.root_translation)[i];
    }
  }
  if (overwrite_observed) {
    if (observed.values.size() != y.values.size()) {
      throw DimensionError("apply_delta: observed motion differs in shape");
    }
    const std::size_t n = y.channels();
    for (std::size_t t = 0; t < y.frames; ++t) {
      for (std::size_t j = 0; j < y.joints; ++j) {
        if (!observed.visibility.visible(t, j)) continue;
        for (std::size_t c = 0; c < n; ++c) y.at(t, j, c) = observed.at(t, j, c);
        if (j == 0 && y.root_translation && observed.root_translation) {
          for (std::size_t c = 0; c < 3; ++c) {
            (*y.root_translation)[t * 3 + c] = (*observed.root_translation)[t * 3 + c];
          }
        }
      }
    }
  }
  y.visibility = observed.visibility;
  return y;
}

std::vector<double> dct_wrap(std::span<const double> time_major, std::size_t frames) {
  const std::size_t c = time_major.size() / frames;
  const nk::Tensor x = nk::Tensor::constant(
      {frames, c}, std::vector<double>(time_major.begin(), time_major.end()));
  const nk::Tensor f = nk::dct_apply(x);
  return {f.values().begin(), f.values().end()};
}

std::vector<double> idct_unwrap(std::span<const double> freq_major, std::size_t frames) {
  const std::size_t c = freq_major.size() / frames;
  const nk::Tensor x = nk::Tensor::constant(
      {frames, c}, std::vector<double>(freq_major.begin(), freq_major.end()));
  const nk::Tensor f = nk::idct_apply(x);
  return {f.values().begin(), f.values().end()};
}

std::size_t feature_dim(const MotionTensor& m) {
  return m.pose_dim() + (m.root_translation ? 3 : 0);
}

std::vector<double> to_features(const MotionTensor& m) {
  const std::size_t p = m.pose_dim(), f = feature_dim(m);
  std::vector<double> out(m.frames * f);
  for (std::size_t t = 0; t < m.frames; ++t) {
    std::copy_n(m.values.begin() + static_cast<std::ptrdiff_t>(t * p), p,
                out.begin() + static_cast<std::ptrdiff_t>(t * f));
    if (m.root_translation) {
      for (std::size_t c = 0; c < 3; ++c) out[t * f + p + c] = (*m.root_translation)[t * 3 + c];
    }
  }
  return out;
}

void from_features(std::span<const double> features, MotionTensor& into) {
  const std::size_t p = into.pose_dim(), f = feature_dim(into);
  if (features.size() != into.frames * f) {
    throw DimensionError("from_features: expected " + std::to_string(into.frames * f) +
                         " values, got " + std::to_string(features.size()));
  }
  for (std::size_t t = 0; t < into.frames; ++t) {
    std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(t * f), p,
                into.values.begin() + static_cast<std::ptrdiff_t>(t * p));
    if (into.root_translation) {
      for (std::size_t c = 0; c < 3; ++c) {
        (*into.root_translation)[t * 3 + c] = features[t * f + p + c];
      }
    }
  }
}

std::vector<unsigned char> feature_visibility(const MotionTensor& m) {
  const std::size_t n = m.channels(), f = feature_dim(m);
  std::vector<unsigned char> out(m.frames * f);
  for (std::size_t t = 0; t < m.frames; ++t) {
    for (std::size_t j = 0; j < m.joints; ++j) {
      const unsigned char v = m.visibility.visible(t, j) ? 1 : 0;
      for (std::size_t c = 0; c < n; ++c) out[t * f + j * n + c] = v;
    }
    if (m.root_translation) {
      const unsigned char v = m.visibility.visible(t, 0) ? 1 : 0;
      for (std::size_t c = 0; c < 3; ++c) out[t * f + m.pose_dim() + c] = v;
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> patch_columns(const model::PatchScheme& scheme,
                                                    std::size_t channels,
                                                    bool has_root_translation) {
  std::vector<std::vector<std::size_t>> cols;
  const std::size_t pose = scheme.joint_count() * channels;
  for (const auto& group : scheme.groups()) {
    std::vector<std::size_t> c;
    for (auto j : group) {
      for (std::size_t k = 0; k < channels; ++k) c.push_back(j * channels + k);
    }
    if (has_root_translation) {
      for (auto j : group) {
        if (j == 0) {
          for (std::size_t k = 0; k < 3; ++k) c.push_back(pose + k);
        }
      }
    }
    cols.push_back(std::move(c));
  }
  return cols;
}

}  // namespace unimask::pipeline
