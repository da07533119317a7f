#include "unimask/trainer/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "unimask/error.hpp"
#include "unimask/io/files.hpp"
#include "unimask/io/json_util.hpp"
#include "unimask/model/checkpoint.hpp"
#include "unimask/numkit/ops.hpp"
#include "unimask/pipeline/conditioning.hpp"

namespace unimask::trainer {

using nlohmann::json;

std::string_view to_string(LossKind kind) { return kind == LossKind::kL1 ? "l1" : "l2"; }

LossKind parse_loss_kind(std::string_view text) {
  if (text == "l1") return LossKind::kL1;
  if (text == "l2") return LossKind::kL2;
  throw ConfigError("unknown loss kind '" + std::string(text) + "' (expected l1 or l2)");
}

std::size_t TrainConfig::total_steps() const {
  std::size_t n = 0;
  for (const auto& p : phases) n += p.steps;
  return n;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (!(fk_weight >= 0.0)) throw ConfigError("fk_weight must be non-negative");
  if (phases.empty()) throw ConfigError("at least one training phase is required");
  for (const auto& p : phases) {
    if (p.curriculum && !(0.0 <= p.p_start && p.p_start <= p.p_end && p.p_end <= 1.0)) {
      throw ConfigError("curriculum bounds need 0 <= p_start <= p_end <= 1");
    }
    if (p.mask.kind == masking::MaskKind::kCustom) {
      throw ConfigError("training needs a generated mask kind, not custom");
    }
  }
}

json to_json(const masking::MaskSpec& s) {
  if (s.kind == masking::MaskKind::kCustom) throw ConfigError("custom masks have no JSON form");
  return {{"kind", std::string(masking::to_string(s.kind))},
          {"observed", s.observed},
          {"past", s.past},
          {"transition", s.transition},
          {"future", s.future},
          {"probability", s.probability}};
}

masking::MaskSpec mask_spec_from_json(const json& j) {
  const std::string what = "mask spec";
  io::reject_unknown_keys(j, {"kind", "observed", "past", "transition", "future", "probability"},
                          what);
  masking::MaskSpec s;
  std::string kind = std::string(masking::to_string(s.kind));
  io::read_key(j, "kind", kind, what);
  try {
    s.kind = masking::parse_mask_kind(kind);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  io::read_key(j, "observed", s.observed, what);
  io::read_key(j, "past", s.past, what);
  io::read_key(j, "transition", s.transition, what);
  io::read_key(j, "future", s.future, what);
  io::read_key(j, "probability", s.probability, what);
  if (!(s.probability >= 0.0 && s.probability <= 1.0)) {
    throw ConfigError("mask probability must lie in [0, 1]");
  }
  return s;
}

json to_json(const TrainConfig& c) {
  json phases = json::array();
  for (const auto& p : c.phases) {
    phases.push_back({{"steps", p.steps},
                      {"mask", to_json(p.mask)},
                      {"curriculum", p.curriculum},
                      {"p_start", p.p_start},
                      {"p_end", p.p_end}});
  }
  return {{"batch_size", c.batch_size},   {"learning_rate", c.learning_rate},
          {"warmup_steps", c.warmup_steps}, {"seed", c.seed},
          {"window", c.window},           {"loss", std::string(to_string(c.loss))},
          {"fk_weight", c.fk_weight},     {"eval_every", c.eval_every},
          {"eval_windows", c.eval_windows}, {"fit_normalizer", c.fit_normalizer},
          {"phases", phases}};
}

TrainConfig train_config_from_json(const json& j) {
  const std::string what = "train config";
  io::reject_unknown_keys(j,
                          {"batch_size", "learning_rate", "warmup_steps", "seed", "window",
                           "loss", "fk_weight", "eval_every", "eval_windows", "fit_normalizer",
                           "phases"},
                          what);
  TrainConfig c;
  io::read_key(j, "batch_size", c.batch_size, what);
  io::read_key(j, "learning_rate", c.learning_rate, what);
  io::read_key(j, "warmup_steps", c.warmup_steps, what);
  io::read_key(j, "seed", c.seed, what);
  io::read_key(j, "window", c.window, what);
  io::read_key(j, "fk_weight", c.fk_weight, what);
  io::read_key(j, "eval_every", c.eval_every, what);
  io::read_key(j, "eval_windows", c.eval_windows, what);
  io::read_key(j, "fit_normalizer", c.fit_normalizer, what);
  std::string loss = "l1";
  io::read_key(j, "loss", loss, what);
  c.loss = parse_loss_kind(loss);
  if (j.contains("phases")) {
    if (!j.at("phases").is_array()) throw ConfigError("train config 'phases' must be an array");
    c.phases.clear();
    for (const auto& pj : j.at("phases")) {
      const std::string pw = "train phase";
      io::reject_unknown_keys(pj, {"steps", "mask", "curriculum", "p_start", "p_end"}, pw);
      TrainPhase p;
      io::read_key(pj, "steps", p.steps, pw);
      io::read_key(pj, "curriculum", p.curriculum, pw);
      io::read_key(pj, "p_start", p.p_start, pw);
      io::read_key(pj, "p_end", p.p_end, pw);
      if (pj.contains("mask")) p.mask = mask_spec_from_json(pj.at("mask"));
      c.phases.push_back(p);
    }
  }
  c.validate();
  return c;
}

nk::Tensor masked_loss(const nk::Tensor& prediction, const nk::Tensor& target,
                       const std::vector<unsigned char>& hidden, LossKind kind) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("loss: prediction " + nk::shape_str(prediction.shape()) +
                         " vs target " + nk::shape_str(target.shape()));
  }
  if (hidden.size() != prediction.size()) throw DimensionError("loss: mask size mismatch");
  std::vector<double> w(hidden.size());
  std::size_t count = 0;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    w[i] = hidden[i] ? 1.0 : 0.0;
    count += hidden[i] ? 1 : 0;
  }
  if (count == 0) throw DegeneracyError("loss: every entry is visible, nothing to score");
  const nk::Tensor diff = nk::sub(prediction, target);
  const nk::Tensor err = kind == LossKind::kL1 ? nk::abs(diff) : nk::square(diff);
  const nk::Tensor weights = nk::Tensor::constant(prediction.shape(), std::move(w));
  return nk::scale(nk::sum(nk::mul(err, weights)), 1.0 / static_cast<double>(count));
}

nk::Tensor fk_positions(const nk::Tensor& features, const kin::SkeletonTopology& topology,
                        bool root_translation) {
  const std::size_t B = features.dim(0), T = features.dim(1), J = topology.size();
  const std::size_t F = features.dim(2);
  if (F != J * 6 + (root_translation ? 3 : 0)) {
    throw DimensionError("fk_positions: feature width does not match the skeleton");
  }
  auto comp = [](const nk::Tensor& v, std::size_t i) { return nk::slice(v, -1, i, i + 1); };
  auto normalize = [](const nk::Tensor& v) {
    return nk::div(v, nk::sqrt(nk::sum(nk::square(v), -1, true)));
  };
  std::vector<nk::Tensor> global_rot(J), pos(J);
  for (std::size_t j = 0; j < J; ++j) {
    const nk::Tensor a1 = nk::slice(features, -1, j * 6, j * 6 + 3);
    const nk::Tensor a2 = nk::slice(features, -1, j * 6 + 3, j * 6 + 6);
    const nk::Tensor b1 = normalize(a1);
    const nk::Tensor b2 = normalize(nk::sub(a2, nk::mul(nk::sum(nk::mul(b1, a2), -1, true), b1)));
    const nk::Tensor b3 = nk::concat(
        {nk::sub(nk::mul(comp(b1, 1), comp(b2, 2)), nk::mul(comp(b1, 2), comp(b2, 1))),
         nk::sub(nk::mul(comp(b1, 2), comp(b2, 0)), nk::mul(comp(b1, 0), comp(b2, 2))),
         nk::sub(nk::mul(comp(b1, 0), comp(b2, 1)), nk::mul(comp(b1, 1), comp(b2, 0)))},
        -1);
    const nk::Tensor local = nk::stack({b1, b2, b3}, -1);  // [B, T, 3, 3], columns b_k
    const auto& joint = topology.joint(j);
    const nk::Tensor offset =
        nk::Tensor::constant({3, 1}, {joint.offset.x(), joint.offset.y(), joint.offset.z()});
    if (joint.parent < 0) {
      nk::Tensor root = nk::reshape(nk::Tensor::constant({3}, {joint.offset.x(), joint.offset.y(),
                                                               joint.offset.z()}),
                                    {1, 1, 3});
      if (root_translation) root = nk::add(nk::slice(features, -1, F - 3, F), root);
      pos[j] = nk::add(root, nk::Tensor::zeros({B, T, 3}));
      global_rot[j] = local;
    } else {
      const auto p = static_cast<std::size_t>(joint.parent);
      pos[j] = nk::add(pos[p], nk::reshape(nk::matmul(global_rot[p], offset), {B, T, 3}));
      global_rot[j] = nk::matmul(global_rot[p], local);
    }
  }
  return nk::stack(pos, 2);
}

Batch make_batch(std::vector<kin::MotionTensor> windows) {
  Batch b;
  if (windows.empty()) throw ContractError("empty batch");
  std::vector<double> target;
  for (const auto& w : windows) {
    const auto f = pipeline::to_features(w);
    target.insert(target.end(), f.begin(), f.end());
    for (unsigned char v : pipeline::feature_visibility(w)) b.hidden.push_back(v ? 0 : 1);
  }
  const std::size_t F = pipeline::feature_dim(windows[0]);
  b.target = nk::Tensor::constant({windows.size(), windows[0].frames, F}, std::move(target));
  b.inputs = std::move(windows);
  return b;
}

namespace {

kin::MotionTensor window_of(const kin::MotionTensor& m, std::size_t start, std::size_t frames) {
  kin::MotionTensor w = kin::MotionTensor::zeros(frames, m.joints, m.repr, m.frame_rate);
  const std::size_t P = m.pose_dim();
  std::copy_n(m.values.begin() + static_cast<std::ptrdiff_t>(start * P), frames * P,
              w.values.begin());
  if (m.root_translation) {
    w.root_translation.emplace(
        m.root_translation->begin() + static_cast<std::ptrdiff_t>(start * 3),
        m.root_translation->begin() + static_cast<std::ptrdiff_t>((start + frames) * 3));
  }
  return w;
}

}  // namespace

kin::MotionTensor sample_window(std::span<const kin::MotionTensor> motions, std::size_t frames,
                                std::mt19937_64& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < motions.size(); ++i) {
    if (motions[i].frames >= frames) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw DataError("no motion has the " + std::to_string(frames) + " frames a window needs");
  }
  const auto& m = motions[eligible[std::uniform_int_distribution<std::size_t>(
      0, eligible.size() - 1)(rng)]];
  const std::size_t start =
      std::uniform_int_distribution<std::size_t>(0, m.frames - frames)(rng);
  return window_of(m, start, frames);
}

masking::MaskSpec phase_mask(const TrainPhase& phase, std::size_t step) {
  masking::MaskSpec spec = phase.mask;
  if (phase.curriculum) {
    spec.probability = masking::curriculum_p(std::min(step, phase.steps), phase.steps,
                                             phase.p_start, phase.p_end);
  }
  return spec;
}

std::vector<kin::MotionTensor> eval_windows(std::span<const kin::MotionTensor> motions,
                                            const masking::MaskSpec& spec, std::size_t frames,
                                            std::size_t limit, const model::PatchScheme& scheme,
                                            std::uint64_t seed) {
  std::vector<kin::MotionTensor> out;
  std::mt19937_64 rng(seed);
  for (const auto& m : motions) {
    if (out.size() >= limit) break;
    if (m.frames < frames) continue;
    kin::MotionTensor w = window_of(m, 0, frames);
    w.visibility = masking::make_mask(spec, frames, scheme, rng());
    out.push_back(std::move(w));
  }
  return out;
}

EvalRecord evaluate(const model::UnimaskModel& model, std::span<const kin::MotionTensor> windows,
                    LossKind kind) {
  EvalRecord r;
  double loss_sum = 0.0, dist_sum = 0.0;
  std::size_t loss_count = 0, joint_count = 0;
  const bool positions = model.config().repr == kin::Representation::kPosition3 ||
                         model.topology().has_offsets();
  constexpr std::size_t kChunk = 16;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const auto chunk = windows.subspan(start, std::min(kChunk, windows.size() - start));
    const auto preds = model.predict(chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto& truth = chunk[i];
      const auto pf = pipeline::to_features(preds[i]);
      const auto tf = pipeline::to_features(truth);
      const auto vis = pipeline::feature_visibility(truth);
      for (std::size_t k = 0; k < pf.size(); ++k) {
        if (vis[k]) continue;
        const double d = pf[k] - tf[k];
        loss_sum += kind == LossKind::kL1 ? std::fabs(d) : d * d;
        ++loss_count;
      }
      if (!positions) continue;
      const auto pp = kin::to_positions(model.topology(), preds[i]);
      const auto tp = kin::to_positions(model.topology(), truth);
      for (std::size_t t = 0; t < truth.frames; ++t) {
        for (std::size_t j = 0; j < truth.joints; ++j) {
          if (truth.visibility.visible(t, j)) continue;
          double s = 0.0;
          for (std::size_t c = 0; c < 3; ++c) {
            const double d = pp.at(t, j, c) - tp.at(t, j, c);
            s += d * d;
          }
          dist_sum += std::sqrt(s);
          ++joint_count;
        }
      }
    }
  }
  r.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
  r.mpjpe = joint_count ? dist_sum / static_cast<double>(joint_count)
                        : std::numeric_limits<double>::quiet_NaN();
  return r;
}

Adam::Adam(std::vector<model::NamedParameter>& params, double lr, std::size_t warmup,
           double beta1, double beta2, double eps)
    : params_(&params), lr_(lr), warmup_(warmup), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr >= 0.0)) throw ParameterError("learning rate must be non-negative");
  for (const auto& p : params) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

double Adam::rate(std::size_t step) const {
  if (warmup_ == 0 || step >= warmup_) return lr_;
  return lr_ * static_cast<double>(step + 1) / static_cast<double>(warmup_);
}

void Adam::step(std::size_t step) {
  ++t_;
  const double lr = rate(step);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_->size(); ++k) {
    auto& p = (*params_)[k].tensor;
    if (!p.has_grad()) continue;
    const auto g = p.mutable_grad();
    auto w = p.mutable_values();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

double Adam::grad_norm() const {
  double s = 0.0;
  for (auto& p : *params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : const_cast<nk::Tensor&>(p.tensor).mutable_grad()) s += g * g;
  }
  return std::sqrt(s);
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

TrainResult train(model::UnimaskModel& model, std::span<const kin::MotionTensor> training,
                  std::span<const kin::MotionTensor> validation, const TrainConfig& config,
                  const ProgressFn& progress) {
  config.validate();
  if (training.empty()) throw DataError("no training motions");
  if (config.fit_normalizer) model.fit_normalizer(training);

  const auto& last_phase = config.phases.back();
  masking::MaskSpec eval_spec = last_phase.mask;
  if (last_phase.curriculum) eval_spec.probability = last_phase.p_end;
  const auto eval_set =
      eval_windows(validation.empty() ? training : validation, eval_spec,
                   eval_spec.window_frames(config.window), config.eval_windows, model.scheme(),
                   config.seed ^ 0x5eed5eedULL);

  const bool use_fk = config.fk_weight > 0.0 && model.config().repr == kin::Representation::kOrtho6d &&
                      model.topology().has_offsets();
  auto& params = model.parameters();
  Adam adam(params, config.learning_rate, config.warmup_steps);
  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.best_eval_loss = std::numeric_limits<double>::infinity();
  const std::size_t total = config.total_steps();

  double last_grad_norm = std::numeric_limits<double>::quiet_NaN();
  auto run_eval = [&](std::size_t step) -> const EvalRecord* {
    if (eval_set.empty()) return nullptr;
    EvalRecord e = evaluate(model, eval_set, config.loss);
    e.step = step;
    if (!std::isfinite(e.loss)) {
      std::ostringstream msg;
      msg << "non-finite eval loss at step " << step << " (lr=" << adam.rate(step)
          << ", grad-norm=" << last_grad_norm << " at the previous step)";
      throw NumericalError(msg.str());
    }
    result.evals.push_back(e);
    if (e.loss < result.best_eval_loss) {
      result.best_eval_loss = e.loss;
      result.best_step = step;
      if (!config.output_dir.empty()) {
        model::save_checkpoint(model, config.output_dir / "best.ckpt",
                               {{"step", step}, {"eval_loss", e.loss}});
      }
    }
    return &result.evals.back();
  };

  std::size_t step = 0;
  for (std::size_t ph = 0; ph < config.phases.size(); ++ph) {
    const auto& phase = config.phases[ph];
    for (std::size_t s = 0; s < phase.steps; ++s, ++step) {
      const masking::MaskSpec spec = phase_mask(phase, s);
      const std::size_t frames = spec.window_frames(config.window);
      std::vector<kin::MotionTensor> windows;
      windows.reserve(config.batch_size);
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        auto w = sample_window(training, frames, rng);
        w.visibility = masking::make_mask(spec, frames, model.scheme(), rng());
        windows.push_back(std::move(w));
      }
      const Batch batch = make_batch(std::move(windows));

      const EvalRecord* eval = step % config.eval_every == 0 ? run_eval(step) : nullptr;

      const auto prep = model.prepare(batch.inputs);
      const nk::Tensor y = model.forward(prep);
      nk::Tensor loss = masked_loss(y, batch.target, batch.hidden, config.loss);
      if (use_fk) {
        const bool rt = model.config().root_translation;
        const nk::Tensor pred_pos = fk_positions(y, model.topology(), rt);
        nk::Tensor true_pos;
        {
          nk::NoGradGuard guard;
          true_pos = fk_positions(batch.target, model.topology(), rt);
        }
        std::vector<unsigned char> hidden_pos;
        hidden_pos.reserve(pred_pos.size());
        for (const auto& w : batch.inputs) {
          for (unsigned char v : w.visibility.flags) hidden_pos.insert(hidden_pos.end(), 3, v ? 0 : 1);
        }
        loss = nk::add(loss, nk::scale(masked_loss(pred_pos, true_pos.detach(), hidden_pos,
                                                   config.loss),
                                       config.fk_weight));
      }
      for (auto& p : params) p.tensor.zero_grad();
      loss.backward();
      const double value = loss.item();
      const double gnorm = adam.grad_norm();
      if (!std::isfinite(value) || !std::isfinite(gnorm)) {
        std::ostringstream msg;
        msg << "non-finite training loss at step " << step << " (lr=" << adam.rate(step)
            << ", grad-norm=" << gnorm << ", loss=" << value << ")";
        throw NumericalError(msg.str());
      }
      last_grad_norm = gnorm;
      adam.step(step);
      LossRecord rec{step, ph, spec.probability, value};
      result.losses.push_back(rec);
      if (progress) progress(rec, eval);
    }
  }
  const EvalRecord* final_eval = run_eval(total);
  if (progress && final_eval) {
    progress(LossRecord{total, config.phases.size() - 1, 0.0,
                        std::numeric_limits<double>::quiet_NaN()},
             final_eval);
  }
  for (auto& p : params) p.tensor.zero_grad();
  if (!config.output_dir.empty()) {
    model::save_checkpoint(model, config.output_dir / "last.ckpt", {{"step", total}});
    io::write_file_atomic(config.output_dir / "loss.csv", loss_csv(result));
  }
  return result;
}

std::string loss_csv(const TrainResult& result) {
  std::ostringstream out;
  out << "step,phase,p_m,loss,eval_loss,eval_mpjpe\n";
  std::size_t e = 0;
  auto emit_eval = [&](std::size_t step) {
    if (e < result.evals.size() && result.evals[e].step == step) {
      out << fmt(result.evals[e].loss) << ',' << fmt(result.evals[e].mpjpe);
      ++e;
    } else {
      out << ',';
    }
  };
  for (const auto& r : result.losses) {
    out << r.step << ',' << r.phase << ',' << fmt(r.p_m) << ',' << fmt(r.loss) << ',';
    emit_eval(r.step);
    out << '\n';
  }
  while (e < result.evals.size()) {
    const auto& ev = result.evals[e];
    const std::size_t phase = result.losses.empty() ? 0 : result.losses.back().phase;
    out << ev.step << ',' << phase << ",,,";
    emit_eval(ev.step);
    out << '\n';
  }
  return out.str();
}

}  // namespace unimask::trainer
