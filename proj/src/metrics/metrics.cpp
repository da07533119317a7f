#include "unimask/metrics/metrics.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <string>

#include "unimask/error.hpp"
#include "unimask/pipeline/conditioning.hpp"

namespace unimask::metrics {

namespace {

void check_pair(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth,
                const char* what) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw ContractError(std::string(what) + ": need the same non-zero number of motions");
  }
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].repr != truth[s].repr) {
      throw ContractError(std::string(what) + ": representation mismatch");
    }
    if (pred[s].frames != truth[s].frames || pred[s].joints != truth[s].joints) {
      throw ContractError(std::string(what) + ": shape mismatch");
    }
  }
}

void require_positions(std::span<const MotionTensor> motions, const char* what) {
  for (const auto& m : motions) {
    if (m.repr != kin::Representation::kPosition3) {
      throw ContractError(std::string(what) + " needs position motions");
    }
  }
}

double joint_distance(const MotionTensor& a, const MotionTensor& b, std::size_t t,
                      std::size_t j) {
  const double dx = a.at(t, j, 0) - b.at(t, j, 0);
  const double dy = a.at(t, j, 1) - b.at(t, j, 1);
  const double dz = a.at(t, j, 2) - b.at(t, j, 2);
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

FrameRange resolve(FrameRange range, std::size_t frames) {
  if (range.end == 0) range.end = frames;
  if (range.begin >= range.end || range.end > frames) {
    throw ContractError("frame range [" + std::to_string(range.begin) + ", " +
                        std::to_string(range.end) + ") outside " + std::to_string(frames) +
                        " frames");
  }
  return range;
}

// Planner calls are not thread safe in FFTW.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// One-sided power spectrum of every column of a [frames, features] block.
class PowerSpectrum {
 public:
  explicit PowerSpectrum(std::size_t frames) : frames_(frames), bins_(frames / 2 + 1) {
    in_ = fftw_alloc_real(frames);
    out_ = fftw_alloc_complex(bins_);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(frames), in_, out_, FFTW_ESTIMATE);
  }
  ~PowerSpectrum() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  PowerSpectrum(const PowerSpectrum&) = delete;
  PowerSpectrum& operator=(const PowerSpectrum&) = delete;

  std::size_t bins() const { return bins_; }

  void compute(const double* series, std::size_t stride, std::vector<double>& power) {
    for (std::size_t t = 0; t < frames_; ++t) in_[t] = series[t * stride];
    fftw_execute(plan_);
    power.resize(bins_);
    for (std::size_t k = 0; k < bins_; ++k) {
      power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }
  }

 private:
  std::size_t frames_, bins_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

// Normalized cumulative spectrum; an all-zero spectrum counts as pure DC.
void cumulative(std::vector<double>& power, double total) {
  double acc = 0.0;
  for (auto& p : power) {
    acc += total > 0.0 ? p / total : 1.0;
    p = total > 0.0 ? acc : 1.0;
  }
}

}  // namespace

std::vector<double> default_horizons_ms() { return {80.0, 160.0, 320.0, 400.0, 560.0, 1000.0}; }

std::vector<std::size_t> horizon_frames(std::span<const double> horizons_ms, double fps,
                                        std::size_t first_hidden) {
  if (!(fps > 0.0)) throw ContractError("horizon_frames: fps must be positive");
  std::vector<std::size_t> out;
  out.reserve(horizons_ms.size());
  for (double ms : horizons_ms) {
    const double steps = std::round(ms * fps / 1000.0);
    if (steps < 1.0) {
      throw ContractError("horizon " + std::to_string(ms) + " ms is shorter than one frame");
    }
    out.push_back(first_hidden + static_cast<std::size_t>(steps) - 1);
  }
  return out;
}

std::vector<double> mpjpe(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth,
                          std::span<const std::size_t> frames) {
  check_pair(pred, truth, "mpjpe");
  require_positions(truth, "mpjpe");
  std::vector<double> out;
  out.reserve(frames.size());
  for (std::size_t t : frames) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < pred.size(); ++s) {
      if (t >= truth[s].frames) throw ContractError("mpjpe: horizon frame beyond the motion");
      for (std::size_t j = 0; j < truth[s].joints; ++j) {
        sum += joint_distance(pred[s], truth[s], t, j);
        ++n;
      }
    }
    out.push_back(sum / static_cast<double>(n));
  }
  return out;
}

double mpjpe_hidden(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth) {
  check_pair(pred, truth, "mpjpe_hidden");
  require_positions(truth, "mpjpe_hidden");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto& vis = truth[s].visibility;
    for (std::size_t t = 0; t < truth[s].frames; ++t) {
      for (std::size_t j = 0; j < truth[s].joints; ++j) {
        if (vis.visible(t, j)) continue;
        sum += joint_distance(pred[s], truth[s], t, j);
        ++n;
      }
    }
  }
  if (n == 0) throw DegeneracyError("mpjpe_hidden: no hidden joints");
  return sum / static_cast<double>(n);
}

PositionStats position_stats(std::span<const MotionTensor> motions) {
  if (motions.empty()) throw ContractError("position_stats: no motions");
  require_positions(motions, "position_stats");
  const std::size_t dims = motions[0].pose_dim();
  std::vector<double> sum(dims, 0.0), sq(dims, 0.0);
  std::size_t n = 0;
  for (const auto& m : motions) {
    if (m.pose_dim() != dims) throw ContractError("position_stats: skeletons differ");
    for (std::size_t t = 0; t < m.frames; ++t) {
      for (std::size_t d = 0; d < dims; ++d) {
        const double v = m.values[t * dims + d];
        sum[d] += v;
        sq[d] += v * v;
      }
    }
    n += m.frames;
  }
  PositionStats stats{std::vector<double>(dims), std::vector<double>(dims)};
  const double count = static_cast<double>(n);
  for (std::size_t d = 0; d < dims; ++d) {
    stats.mean[d] = sum[d] / count;
    const double var = std::max(sq[d] / count - stats.mean[d] * stats.mean[d], 0.0);
    stats.stddev[d] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return stats;
}

double l2p(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth,
           const PositionStats& stats, FrameRange range) {
  check_pair(pred, truth, "l2p");
  require_positions(truth, "l2p");
  const std::size_t dims = truth[0].pose_dim();
  if (stats.mean.size() != dims || stats.stddev.size() != dims) {
    throw ContractError("l2p: statistics do not match the skeleton");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto r = resolve(range, truth[s].frames);
    for (std::size_t t = r.begin; t < r.end; ++t) {
      double sq = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        const double a = (pred[s].values[t * dims + d] - stats.mean[d]) / stats.stddev[d];
        const double b = (truth[s].values[t * dims + d] - stats.mean[d]) / stats.stddev[d];
        sq += (a - b) * (a - b);
      }
      sum += std::sqrt(sq);
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

double l2q(std::span<const kin::Quaternion> pred, std::span<const kin::Quaternion> truth,
           std::size_t samples, std::size_t frames, std::size_t joints) {
  const std::size_t total = samples * frames * joints;
  if (total == 0 || pred.size() != total || truth.size() != total) {
    throw ContractError("l2q: expected " + std::to_string(total) + " quaternions per side");
  }
  auto check_unit = [](const kin::Quaternion& q) {
    if (std::fabs(q.norm() - 1.0) > 1e-6) {
      throw ContractError("l2q: quaternion norm " + std::to_string(q.norm()) + " is not 1");
    }
  };
  double sum = 0.0;
  for (std::size_t f = 0; f < samples * frames; ++f) {
    double sq = 0.0;
    for (std::size_t j = 0; j < joints; ++j) {
      const auto& q = truth[f * joints + j];
      check_unit(q);
      check_unit(pred[f * joints + j]);
      const auto p = kin::align_hemisphere(pred[f * joints + j], q);
      sq += (p.w - q.w) * (p.w - q.w) + (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) +
            (p.z - q.z) * (p.z - q.z);
    }
    sum += std::sqrt(sq);
  }
  return sum / static_cast<double>(samples * frames);
}

double l2q(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth,
           FrameRange range) {
  check_pair(pred, truth, "l2q");
  if (truth[0].repr != kin::Representation::kOrtho6d) {
    throw ContractError("l2q needs ortho-6D motions");
  }
  const std::size_t J = truth[0].joints;
  const auto r = resolve(range, truth[0].frames);
  std::vector<kin::Quaternion> qp, qt;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (truth[s].frames != truth[0].frames || truth[s].joints != J) {
      throw ContractError("l2q: motions differ in shape");
    }
    for (std::size_t t = r.begin; t < r.end; ++t) {
      for (std::size_t j = 0; j < J; ++j) {
        qp.push_back(kin::joint_quaternion(pred[s], t, j));
        qt.push_back(kin::joint_quaternion(truth[s], t, j));
      }
    }
  }
  return l2q(qp, qt, pred.size(), r.end - r.begin, J);
}

NpssResult npss(std::span<const double> pred, std::span<const double> truth, std::size_t samples,
                std::size_t frames, std::size_t features) {
  const std::size_t total = samples * frames * features;
  if (total == 0 || pred.size() != total || truth.size() != total) {
    throw ContractError("npss: expected " + std::to_string(total) + " values per side");
  }
  PowerSpectrum spectrum(frames);
  std::vector<double> pp, pt;
  double weighted = 0.0, weights = 0.0;
  NpssResult result;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t base = s * frames * features;
    for (std::size_t f = 0; f < features; ++f) {
      spectrum.compute(truth.data() + base + f, features, pt);
      double wt = 0.0;
      for (double v : pt) wt += v;
      if (!(wt > 0.0)) {
        ++result.skipped;
        continue;
      }
      spectrum.compute(pred.data() + base + f, features, pp);
      double wp = 0.0;
      for (double v : pp) wp += v;
      cumulative(pt, wt);
      cumulative(pp, wp);
      double emd = 0.0;
      for (std::size_t k = 0; k < pt.size(); ++k) emd += std::fabs(pt[k] - pp[k]);
      weighted += wt * emd;
      weights += wt;
    }
  }
  result.value = weights > 0.0 ? weighted / weights : 0.0;
  return result;
}

NpssResult npss(std::span<const MotionTensor> pred, std::span<const MotionTensor> truth,
                FrameRange range) {
  check_pair(pred, truth, "npss");
  const bool rotations = truth[0].repr == kin::Representation::kOrtho6d;
  const std::size_t J = truth[0].joints;
  const std::size_t per_joint = rotations ? 4 : 3;
  const auto r = resolve(range, truth[0].frames);
  const std::size_t T = r.end - r.begin, F = J * per_joint;
  std::vector<double> vp, vt;
  vp.reserve(pred.size() * T * F);
  vt.reserve(pred.size() * T * F);
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (truth[s].frames != truth[0].frames || truth[s].joints != J) {
      throw ContractError("npss: motions differ in shape");
    }
    std::vector<kin::Quaternion> prev_p(J), prev_t(J);
    for (std::size_t t = r.begin; t < r.end; ++t) {
      for (std::size_t j = 0; j < J; ++j) {
        if (!rotations) {
          for (std::size_t c = 0; c < 3; ++c) {
            vp.push_back(pred[s].at(t, j, c));
            vt.push_back(truth[s].at(t, j, c));
          }
          continue;
        }
        auto qt = kin::joint_quaternion(truth[s], t, j);
        auto qp = kin::joint_quaternion(pred[s], t, j);
        if (t > r.begin) {
          qt = kin::align_hemisphere(qt, prev_t[j]);
          qp = kin::align_hemisphere(qp, prev_p[j]);
        } else {
          qp = kin::align_hemisphere(qp, qt);
        }
        prev_t[j] = qt;
        prev_p[j] = qp;
        for (const double v : {qp.w, qp.x, qp.y, qp.z}) vp.push_back(v);
        for (const double v : {qt.w, qt.x, qt.y, qt.z}) vt.push_back(v);
      }
    }
  }
  return npss(vp, vt, pred.size(), T, F);
}

MotionTensor baseline_zero_velocity(const MotionTensor& x) {
  return pipeline::fill_motion(x, pipeline::FillStrategy::kRepeatLast).x_fill;
}

MotionTensor baseline_interpolation(const MotionTensor& x) {
  return pipeline::fill_motion(x, pipeline::FillStrategy::kInterpolate).x_fill;
}

}  // namespace unimask::metrics
