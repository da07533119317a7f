// Acceptance checks. Usage: acceptance [criterion ...] (default: all).
// Prints one PASS/FAIL line per criterion; exits 1 when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "metric_oracles.hpp"
#include "unimask/io/bvh.hpp"
#include "unimask/io/motion_file.hpp"
#include "unimask/io/synthetic.hpp"
#include "unimask/masking/masks.hpp"
#include "unimask/metrics/metrics.hpp"
#include "unimask/metrics/report.hpp"
#include "unimask/model/checkpoint.hpp"
#include "unimask/model/unimask_model.hpp"
#include "unimask/numkit/dct.hpp"
#include "unimask/numkit/ops.hpp"
#include "unimask/trainer/trainer.hpp"

using namespace unimask;
using kin::MotionTensor;
using masking::MaskKind;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr std::size_t kMaskDraws = 10000;
constexpr double kZ99 = 2.576;
constexpr std::size_t kPatchifyCases = 1000;
constexpr std::size_t kMetricCases = 100;
constexpr double kMetricTol = 1e-9;
constexpr double kDctTol = 1e-9;
constexpr std::size_t kDctMaxFrames = 256;
constexpr std::size_t kTrainMotions = 200;
constexpr std::size_t kTestMotions = 50;
constexpr std::size_t kMotionFrames = 64;
constexpr std::size_t kTrainSteps = 2000;
constexpr double kBeatRatio = 0.8;
constexpr double kLearnSeconds = 15 * 60;
constexpr std::uint64_t kSeeds[] = {0, 1, 2};
constexpr double kOcclusionP = 0.2;
constexpr std::size_t kOcclusionSteps = 1000;
constexpr std::size_t kOcclusionObserved = 10;
constexpr std::size_t kOcclusionWindow = 20;
constexpr double kCausalTol = 1e-12;
constexpr double kOneShotMs = 100.0;

constexpr std::size_t kJ = 22;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

MotionTensor random_motion(std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::random_positions(frames, kJ, rng);
}

void randomize(model::UnimaskModel& m, const std::string& prefix, std::uint64_t seed,
               double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& p : m.parameters()) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    for (auto& v : p.tensor.mutable_values()) v = n(rng);
  }
}

std::vector<double> to_vec(const nk::Tensor& t) { return {t.values().begin(), t.values().end()}; }

masking::MaskSpec inbetween_spec(std::size_t transition = 15) {
  masking::MaskSpec s;
  s.kind = MaskKind::kInbetween;
  s.past = 10;
  s.transition = transition;
  s.future = 1;
  return s;
}

struct GaitData {
  std::vector<MotionTensor> train, test;
};

const GaitData& gait_data() {
  static const GaitData data = [] {
    io::SyntheticGaitParams p;
    p.frames = kMotionFrames;
    p.count = kTrainMotions;
    GaitData d;
    d.train = io::generate_gait(p, 0);
    p.count = kTestMotions;
    d.test = io::generate_gait(p, 1);
    return d;
  }();
  return data;
}

metrics::EvalReport score(const model::UnimaskModel* m, const metrics::EvalSetup& setup) {
  const auto& d = gait_data();
  return metrics::evaluate_methods(setup, d.test, metrics::position_stats(d.train),
                                   kin::default_topology(), m);
}

// Trains `config` on the gait data; returns the model's hidden-joint MPJPE
// in mm and, through `interp`, the interpolation baseline's.
double train_and_score(model::ModelConfig config, const trainer::TrainPhase& phase,
                       std::size_t window, std::uint64_t seed, const metrics::EvalSetup& setup,
                       double* interp = nullptr, std::size_t* params = nullptr) {
  config.init_seed = seed;
  model::UnimaskModel m(config);
  if (params) *params = m.parameter_count();
  trainer::TrainConfig tc;
  tc.seed = seed;
  tc.window = window;
  tc.phases = {phase};
  trainer::train(m, gait_data().train, {}, tc);
  const auto r = score(&m, setup);
  if (interp) *interp = r.methods[1].transitions[0].mpjpe;
  return r.methods[2].transitions[0].mpjpe;
}

// ---- 1 -------------------------------------------------------------------
Outcome gradient_integrity() {
  Outcome o;
  model::ModelConfig c;
  c.width = 16;
  c.encoder_depth = 1;
  c.decoder_depth = 1;
  c.heads = 2;
  c.mlp_ratio = 2;
  c.init_std = 0.3;
  model::UnimaskModel m(c);
  o.require(m.scheme().patch_count() == 5, "S3 scheme");
  // A zero head would leave every upstream gradient at zero.
  randomize(m, "head", 2, 0.3);
  auto x = random_motion(6, 40);
  x.visibility = masking::gen_inbetween_mask(6, 2, 3, 1, kJ);
  const std::vector<MotionTensor> batch{x};
  const auto prep = m.prepare(batch);
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> tv(6 * 66);
  for (auto& v : tv) v = n(rng);
  const auto target = nk::Tensor::constant({1, 6, 66}, tv);
  auto loss = [&] { return nk::mean(nk::square(nk::sub(m.forward(prep), target))); };
  std::vector<nk::Tensor> params;
  std::vector<std::string> labels;
  for (auto& p : m.parameters()) {
    params.push_back(p.tensor);
    labels.push_back(p.name);
  }
  const auto r = testing::grad_check(loss, params, labels, kGradStep);
  o.detail << r.checked << " weights, max rel error " << r.max_rel_error << " at " << r.worst
           << ", max abs error " << r.max_abs_error << " ";
  o.require(r.checked == m.parameter_count(), "every parameter checked");
  o.require(r.max_rel_error < kGradRelTol, "rel error < 1e-4");
  return o;
}

// ---- 2 -------------------------------------------------------------------
Outcome delta_identity() {
  Outcome o;
  const std::size_t T = 26;
  model::UnimaskModel m{model::ModelConfig{}};
  std::size_t checked = 0;
  for (auto kind : {MaskKind::kForecast, MaskKind::kInbetween, MaskKind::kCompletion,
                    MaskKind::kOcclusion, MaskKind::kCustom}) {
    masking::MaskSpec spec;
    spec.kind = kind;
    spec.probability = 0.4;
    if (kind == MaskKind::kCustom) {
      kin::VisibilityMask v(T, kJ);
      for (std::size_t t = 5; t < T; t += 3) v.set(t, (7 * t) % kJ, false);
      spec.custom = v;
    }
    std::vector<MotionTensor> batch;
    for (std::uint64_t s = 0; s < 3; ++s) {
      auto x = random_motion(T, 100 + s);
      x.visibility = masking::make_mask(spec, T, m.scheme(), s);
      batch.push_back(std::move(x));
    }
    const auto prep = m.prepare(batch);
    const bool same = to_vec(m.forward(prep)) == to_vec(prep.reference);
    o.require(same, std::string(masking::to_string(kind)) + " bit-exact");
    ++checked;
  }
  o.detail << checked << " mask kinds, 3 sequences each ";
  return o;
}

// ---- 3 -------------------------------------------------------------------
Outcome mask_suite() {
  Outcome o;
  const auto scheme = model::PatchScheme::make(model::PatchVariant::kFiveParts,
                                               kin::default_topology());
  const std::size_t T = 30;

  // Forecast / inbetween partitions.
  const auto f = masking::gen_forecast_mask(T, 10, kJ);
  bool ok = f == masking::gen_forecast_mask(T, 10, kJ);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < kJ; ++j) ok = ok && f.visible(t, j) == (t < 10);
  }
  o.require(ok, "forecast partition");
  const auto ib = masking::gen_inbetween_mask(T, 10, 15, 5, kJ);
  ok = ib == masking::gen_inbetween_mask(T, 10, 15, 5, kJ);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < kJ; ++j) ok = ok && ib.visible(t, j) == (t < 10 || t >= 25);
  }
  o.require(ok, "inbetween partition");

  auto within = [&](std::size_t hidden, std::size_t total, double p, const char* what) {
    const double n = static_cast<double>(total);
    const double frac = static_cast<double>(hidden) / n;
    const double half = kZ99 * std::sqrt(p * (1.0 - p) / n);
    o.detail << what << " " << frac << " (p " << p << " +- " << half << ") ";
    o.require(std::fabs(frac - p) <= half, std::string(what) + " fraction in 99% CI");
  };

  // Completion: observed prefix intact, whole patches hidden at rate p.
  const double pc = 0.3;
  std::size_t hidden = 0, total = 0;
  ok = true;
  for (std::size_t d = 0; d < kMaskDraws; ++d) {
    const auto v = masking::gen_completion_mask(T, 10, scheme, pc, d);
    if (d < 50) ok = ok && v == masking::gen_completion_mask(T, 10, scheme, pc, d);
    const auto tok = masking::patchify_mask(v, scheme);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < kJ; ++j) {
        // Every joint of a patch shares its token's state.
        ok = ok && v.visible(t, j) == tok.visible(t, scheme.patch_of(j));
        if (t < 10) ok = ok && v.visible(t, j);
      }
      if (t < 10) continue;
      for (std::size_t l = 0; l < scheme.patch_count(); ++l) {
        hidden += tok.visible(t, l) ? 0 : 1;
        ++total;
      }
    }
  }
  o.require(ok, "completion partition and determinism");
  within(hidden, total, pc, "completion");

  // Occlusion: joints of observed frames hidden at rate p, rest hidden.
  hidden = total = 0;
  ok = true;
  for (std::size_t d = 0; d < kMaskDraws; ++d) {
    const auto v = masking::gen_occlusion_mask(T, 10, kJ, kOcclusionP, d);
    if (d < 50) ok = ok && v == masking::gen_occlusion_mask(T, 10, kJ, kOcclusionP, d);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < kJ; ++j) {
        if (t >= 10) {
          ok = ok && !v.visible(t, j);
          continue;
        }
        hidden += v.visible(t, j) ? 0 : 1;
        ++total;
      }
    }
  }
  o.require(ok, "occlusion partition and determinism");
  within(hidden, total, kOcclusionP, "occlusion");

  // patchify_mask vs per-patch AND.
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> density(0.7, 1.0);
  const model::PatchScheme schemes[] = {
      scheme, model::PatchScheme::make(model::PatchVariant::kJoints, kin::default_topology()),
      model::PatchScheme::make(model::PatchVariant::kWholeBody, kin::default_topology()),
      model::PatchScheme::make(model::PatchVariant::kHipsSeparate, kin::default_topology())};
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < kPatchifyCases; ++i) {
    std::bernoulli_distribution coin(density(rng));
    kin::VisibilityMask v(8, kJ);
    for (auto& flag : v.flags) flag = coin(rng) ? 1 : 0;
    const auto& s = schemes[i % 4];
    const auto got = masking::patchify_mask(v, s);
    for (std::size_t t = 0; t < 8; ++t) {
      for (std::size_t l = 0; l < s.patch_count(); ++l) {
        bool all = true;
        for (std::size_t j = 0; j < kJ; ++j) {
          if (s.patch_of(j) == l) all = all && v.visible(t, j);
        }
        mismatches += got.visible(t, l) != all;
      }
    }
  }
  o.detail << "patchify mismatches " << mismatches << "/" << kPatchifyCases << " masks ";
  o.require(mismatches == 0, "patchify oracle");
  return o;
}

// ---- 4 -------------------------------------------------------------------
Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(2024);
  double worst[4] = {0, 0, 0, 0};
  for (std::size_t c = 0; c < kMetricCases; ++c) {
    const std::size_t S = 1 + c % 3, T = 8 + c % 9, J = 1 + c % 6;
    std::vector<MotionTensor> p, q, train;
    for (std::size_t s = 0; s < S; ++s) {
      p.push_back(oracle::random_positions(T, J, rng));
      q.push_back(oracle::random_positions(T, J, rng));
      train.push_back(oracle::random_positions(T, J, rng));
    }
    std::vector<std::size_t> frames(T);
    for (std::size_t t = 0; t < T; ++t) frames[t] = t;
    const auto mp = metrics::mpjpe(p, q, frames);
    for (std::size_t t = 0; t < T; ++t) {
      worst[0] = std::max(worst[0], std::fabs(mp[t] - oracle::mpjpe_at(p, q, t)));
    }
    const auto stats = metrics::position_stats(train);
    worst[1] = std::max(worst[1], std::fabs(metrics::l2p(p, q, stats, {1, T}) -
                                            oracle::l2p(p, q, stats, 1, T)));

    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<kin::Quaternion> qa, qb;
    for (std::size_t i = 0; i < S * T * J; ++i) {
      qa.push_back(kin::Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized());
      qb.push_back(kin::Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized());
    }
    worst[2] = std::max(worst[2], std::fabs(metrics::l2q(qa, qb, S, T, J) -
                                            oracle::l2q(qa, qb, S * T, J)));

    const std::size_t F = 3 * J;
    std::vector<double> a(S * T * F), b(S * T * F);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    worst[3] = std::max(worst[3], std::fabs(metrics::npss(a, b, S, T, F).value -
                                            oracle::npss(a, b, S, T, F)));
  }
  const char* names[] = {"MPJPE", "L2P", "L2Q", "NPSS"};
  for (int k = 0; k < 4; ++k) {
    o.detail << names[k] << " " << worst[k] << " ";
    o.require(worst[k] <= kMetricTol, std::string(names[k]) + " oracle");
  }

  std::vector<MotionTensor> zt{MotionTensor::zeros(4, kJ, kin::Representation::kPosition3)};
  auto zp = zt;
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t j = 0; j < kJ; ++j) {
      zp[0].at(t, j, 0) = 3.0;
      zp[0].at(t, j, 2) = 4.0;
    }
  }
  const std::size_t frames[] = {0, 1, 2, 3};
  bool five = true;
  for (double v : metrics::mpjpe(zp, zt, frames)) five = five && v == 5.0;
  o.require(five, "3-4-5 exactly 5.0");

  std::vector<double> s(3 * 20);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(0.37 * static_cast<double>(i * i));
  o.require(metrics::npss(s, s, 1, 20, 3).value == 0.0, "NPSS(identical) = 0");

  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<kin::Quaternion> q, neg;
  for (int i = 0; i < 40; ++i) {
    q.push_back(kin::Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized());
    neg.push_back(-q.back());
  }
  o.require(metrics::l2q(q, neg, 2, 4, 5) == 0.0, "L2Q(q, -q) = 0");
  return o;
}

// ---- 5 -------------------------------------------------------------------
Outcome round_trips() {
  Outcome o;
  double dct_err = 0.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t T = 1; T <= kDctMaxFrames; ++T) {
    std::vector<double> v(T * 3);
    for (auto& x : v) x = n(rng);
    const auto x = nk::Tensor::constant({T, 3}, v);
    const auto back = nk::idct_apply(nk::dct_apply(x));
    for (std::size_t i = 0; i < v.size(); ++i) dct_err = std::max(dct_err, std::fabs(back[i] - v[i]));
  }
  o.detail << "DCT max error " << dct_err << " ";
  o.require(dct_err <= kDctTol, "DCT/IDCT identity");

  for (auto variant : {model::PatchVariant::kJoints, model::PatchVariant::kWholeBody,
                       model::PatchVariant::kFiveParts, model::PatchVariant::kHipsSeparate}) {
    model::ModelConfig c;
    c.width = 16;
    c.heads = 2;
    c.patch_variant = variant;
    model::UnimaskModel m(c);
    std::vector<double> v(2 * 7 * 66);
    for (auto& x : v) x = n(rng);
    const auto x = nk::Tensor::constant({2, 7, 66}, v);
    o.require(to_vec(m.regroup(m.pose_decompose(x))) == v,
              "PD/regroup " + std::string(model::to_string(variant)));
  }

  const auto dir = fs::temp_directory_path() / "unimask_acceptance_rt";
  fs::remove_all(dir);
  io::SyntheticGaitParams p;
  p.count = 2;
  p.frames = 16;
  p.repr = kin::Representation::kOrtho6d;
  for (const auto& m : io::generate_gait(p)) {
    io::MotionFile f{"default22", m};
    f.motion.visibility.set(3, 5, false);
    io::write_motion_file(dir / "m.json", f);
    const auto back = io::read_motion_file(dir / "m.json");
    o.require(back.motion.values == f.motion.values &&
                  back.motion.root_translation == f.motion.root_translation &&
                  back.motion.visibility == f.motion.visibility,
              "motion file bit-exact");
  }

  model::UnimaskModel m{model::ModelConfig{}};
  randomize(m, "", 9, 0.1);
  m.fit_normalizer(gait_data().test);
  model::save_checkpoint(m, dir / "m.ckpt");
  const auto loaded = model::load_checkpoint(dir / "m.ckpt");
  bool same = loaded.parameters().size() == m.parameters().size();
  for (std::size_t i = 0; same && i < m.parameters().size(); ++i) {
    same = to_vec(loaded.parameters()[i].tensor) == to_vec(m.parameters()[i].tensor);
  }
  same = same && loaded.norm_mean() == m.norm_mean() && loaded.norm_std() == m.norm_std();
  same = same && model::serialize_checkpoint(loaded) == model::serialize_checkpoint(m);
  o.require(same, "checkpoint bit-exact");
  fs::remove_all(dir);

  const auto bvh = io::read_bvh("data/three_joint.bvh");
  const auto& t = bvh.topology;
  const bool topo = t.size() == 3 && t.joint(0).name == "Hips" && t.joint(1).name == "Spine" &&
                    t.joint(2).name == "Head" && t.joint(0).parent == -1 &&
                    t.joint(1).parent == 0 && t.joint(2).parent == 1 &&
                    t.joint(0).offset == kin::Vec3(0, 90, 0) &&
                    t.joint(1).offset == kin::Vec3(0, 10, 0) &&
                    t.joint(2).offset == kin::Vec3(0, 25, 5) && bvh.motion.frames == 2;
  o.require(topo, "BVH fixture topology");
  return o;
}

// ---- 6 -------------------------------------------------------------------
Outcome learning_beats_interpolation() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  trainer::TrainPhase phase;
  phase.steps = kTrainSteps;
  phase.mask = inbetween_spec();
  metrics::EvalSetup setup;
  setup.mask = inbetween_spec();
  double interp = 0.0;
  std::size_t params = 0;
  const double model_mm =
      train_and_score(model::ModelConfig{}, phase, 0, 0, setup, &interp, &params);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.detail << params << " params, model " << model_mm << " mm vs interpolation " << interp
           << " mm, ratio " << model_mm / interp << " (limit " << kBeatRatio << "), " << secs
           << " s ";
  o.require(model_mm <= kBeatRatio * interp, "MPJPE <= 0.8 x interpolation");
  o.require(secs < kLearnSeconds, "runtime < 15 min");
  return o;
}

// ---- 7 -------------------------------------------------------------------
Outcome pd_ablation() {
  Outcome o;
  trainer::TrainPhase phase;
  phase.steps = kTrainSteps;
  phase.mask = inbetween_spec();
  metrics::EvalSetup setup;
  setup.mask = inbetween_spec();

  model::ModelConfig s3;
  const std::size_t target = model::UnimaskModel(s3).parameter_count();
  // Whole-pose tokens shrink the aggregation input; widen its hidden layer
  // to the closest budget.
  model::ModelConfig s2;
  s2.use_pd = false;
  std::size_t best_h = 0, best_gap = SIZE_MAX, s2_params = 0;
  for (std::size_t h = 8; h <= 32 * s3.width; h += 8) {
    s2.pa_hidden = h;
    const std::size_t n = model::UnimaskModel(s2).parameter_count();
    const std::size_t gap = n > target ? n - target : target - n;
    if (gap < best_gap) {
      best_gap = gap;
      best_h = h;
      s2_params = n;
    }
  }
  s2.pa_hidden = best_h;
  o.detail << "S3 " << target << " params, S2 " << s2_params << " params (pa_hidden " << best_h
           << "); ";
  o.require(static_cast<double>(best_gap) <= 0.02 * static_cast<double>(target),
            "budgets within 2%");

  double mean3 = 0.0, mean2 = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const double a = train_and_score(s3, phase, 0, seed, setup);
    const double b = train_and_score(s2, phase, 0, seed, setup);
    o.detail << "seed " << seed << ": S3 " << a << " S2 " << b << "; ";
    std::fflush(stdout);
    mean3 += a / std::size(kSeeds);
    mean2 += b / std::size(kSeeds);
  }
  o.detail << "mean S3 " << mean3 << " mm, S2 " << mean2 << " mm ";
  o.require(mean3 <= mean2, "S3 mean <= S2 mean");
  return o;
}

// ---- 8 -------------------------------------------------------------------
Outcome occlusion_robustness() {
  Outcome o;
  masking::MaskSpec occluded;
  occluded.kind = MaskKind::kOcclusion;
  occluded.observed = kOcclusionObserved;
  occluded.probability = kOcclusionP;
  masking::MaskSpec clean;
  clean.kind = MaskKind::kForecast;
  clean.observed = kOcclusionObserved;

  metrics::EvalSetup setup;
  setup.mask = occluded;
  setup.window = kOcclusionWindow;
  setup.seed = 777;

  trainer::TrainPhase occ_phase, clean_phase;
  occ_phase.steps = clean_phase.steps = kOcclusionSteps;
  occ_phase.mask = occluded;
  clean_phase.mask = clean;
  double mean_occ = 0.0, mean_clean = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const double a = train_and_score({}, occ_phase, kOcclusionWindow, seed, setup);
    const double b = train_and_score({}, clean_phase, kOcclusionWindow, seed, setup);
    o.detail << "seed " << seed << ": occlusion-trained " << a << " clean-trained " << b << "; ";
    mean_occ += a / std::size(kSeeds);
    mean_clean += b / std::size(kSeeds);
  }
  o.detail << "mean " << mean_occ << " vs " << mean_clean << " mm ";
  o.require(mean_occ < mean_clean, "occlusion-trained mean < clean-trained mean");
  return o;
}

// ---- 9 -------------------------------------------------------------------
Outcome causality() {
  Outcome o;
  model::ModelConfig c;
  c.causal_attention = true;
  model::UnimaskModel m(c);
  randomize(m, "head", 3, 0.1);
  const std::size_t T = 16;
  const auto x = random_motion(T, 4);
  const std::vector<MotionTensor> batch{x};
  const auto base = to_vec(m.forward(m.prepare(batch)));
  const std::size_t F = 66;
  double worst = 0.0;
  bool future_moves = true;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  // Frame 0 anchors the root, so perturbations start at frame 1.
  for (std::size_t t0 = 1; t0 < T; ++t0) {
    auto y = x;
    for (std::size_t k = 0; k < F; ++k) y.values[t0 * F + k] += n(rng);
    const std::vector<MotionTensor> moved{y};
    const auto out = to_vec(m.forward(m.prepare(moved)));
    for (std::size_t i = 0; i < t0 * F; ++i) worst = std::max(worst, std::fabs(out[i] - base[i]));
    bool moved_any = false;
    for (std::size_t i = t0 * F; i < T * F; ++i) moved_any |= out[i] != base[i];
    future_moves = future_moves && moved_any;
  }
  o.detail << "max past change " << worst << " over " << T - 1 << " perturbed frames ";
  o.require(worst <= kCausalTol, "past outputs unchanged");
  o.require(future_moves, "perturbed frames do change their outputs");
  return o;
}

// ---- 10 ------------------------------------------------------------------
Outcome one_shot() {
  Outcome o;
  model::UnimaskModel m{model::ModelConfig{}};
  randomize(m, "head", 4, 0.05);
  const auto spec = inbetween_spec(30);
  const std::size_t T = spec.window_frames(0);
  o.require(T == 41, "T = 41");
  auto x = gait_data().test[0];
  auto window = MotionTensor::zeros(T, kJ, x.repr, x.frame_rate);
  std::copy_n(x.values.begin(), T * 66, window.values.begin());
  window.visibility = masking::make_mask(spec, T, m.scheme(), 0);
  const std::vector<MotionTensor> batch{window};

  // predict is exactly one forward pass plus the observed-entry overwrite.
  const auto prep = m.prepare(batch);
  const auto y = m.forward(prep);
  auto net = MotionTensor::zeros(T, kJ, window.repr, window.frame_rate);
  const auto yv = to_vec(y);
  std::vector<double> delta(yv.size());
  for (std::size_t i = 0; i < yv.size(); ++i) delta[i] = yv[i] - prep.reference[i];
  pipeline::from_features(delta, net);
  const auto expected = pipeline::apply_delta(net, prep.filled[0].x_ref, window, true);
  const auto got = m.predict(batch)[0];
  double diff = 0.0;
  for (std::size_t i = 0; i < got.values.size(); ++i) {
    diff = std::max(diff, std::fabs(got.values[i] - expected.values[i]));
  }
  o.require(diff <= 1e-12, "predict equals a single forward pass");

  for (int i = 0; i < 3; ++i) m.predict(batch);
  std::vector<double> ms;
  for (int i = 0; i < 21; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    m.predict(batch);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  o.detail << "median " << ms[ms.size() / 2] << " ms, max " << ms.back() << " ms, single-pass diff "
           << diff << " ";
  o.require(ms[ms.size() / 2] < kOneShotMs, "median < 100 ms");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  nk::tune_allocator();
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"gradient integrity", gradient_integrity}},
      {2, {"delta identity", delta_identity}},
      {3, {"mask-pattern suite", mask_suite}},
      {4, {"metric oracles", metric_oracles}},
      {5, {"round trips", round_trips}},
      {6, {"learning beats interpolation", learning_beats_interpolation}},
      {7, {"PD ablation direction", pd_ablation}},
      {8, {"occlusion robustness direction", occlusion_robustness}},
      {9, {"causality invariance", causality}},
      {10, {"one-shot efficiency", one_shot}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (const auto& [k, _] : criteria) selected.push_back(k);
  }
  bool all = true;
  for (int k : selected) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::printf("criterion %d: unknown\n", k);
      all = false;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = it->second.second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d (%s): %s  %s(%.1f s)\n", k, it->second.first, r.pass ? "PASS" : "FAIL",
                r.detail.str().c_str(), secs);
    std::fflush(stdout);
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
