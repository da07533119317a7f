#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "unimask/kinematics/motion.hpp"
#include "unimask/masking/masks.hpp"
#include "unimask/model/unimask_model.hpp"
#include "unimask/numkit/tensor.hpp"

namespace unimask::trainer {

enum class LossKind { kL1, kL2 };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

// One stretch of training with a fixed mask recipe. With `curriculum`, the
// mask probability ramps linearly from p_start to p_end over the phase.
struct TrainPhase {
  std::size_t steps = 2000;
  masking::MaskSpec mask;
  bool curriculum = false;
  double p_start = 0.85;
  double p_end = 1.0;
};

struct TrainConfig {
  std::size_t batch_size = 8;
  double learning_rate = 3e-4;
  std::size_t warmup_steps = 100;
  std::uint64_t seed = 0;
  // Window length for mask kinds other than inbetween.
  std::size_t window = 50;
  LossKind loss = LossKind::kL1;
  // Weight of the FK position term; used only for rotation data on a
  // skeleton with offsets.
  double fk_weight = 1.0;
  std::size_t eval_every = 100;
  std::size_t eval_windows = 64;
  // Refit the model's normalizer on the training motions before step 0.
  bool fit_normalizer = true;
  // best.ckpt, last.ckpt and loss.csv go here when non-empty.
  std::filesystem::path output_dir;
  // Run back to back; a single phase is plain training.
  std::vector<TrainPhase> phases{TrainPhase{}};

  std::size_t total_steps() const;
  // Throws ConfigError.
  void validate() const;
};

// Custom masks have no JSON form.
nlohmann::json to_json(const masking::MaskSpec& spec);
masking::MaskSpec mask_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& config);
// Unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

// Mean |Y - target| (or squared) over entries where `hidden` is 1. All
// three share the shape [B, T, F]. Throws DegeneracyError when nothing is
// hidden.
nk::Tensor masked_loss(const nk::Tensor& prediction, const nk::Tensor& target,
                       const std::vector<unsigned char>& hidden, LossKind kind);

// Differentiable global joint positions [B, T, J, 3] from ortho-6D
// features [B, T, F] (root translation in the last three channels when
// `root_translation`).
nk::Tensor fk_positions(const nk::Tensor& features, const kin::SkeletonTopology& topology,
                        bool root_translation);

// A batch of masked windows with their raw-unit targets.
struct Batch {
  std::vector<kin::MotionTensor> inputs;  // ground truth values + visibility
  nk::Tensor target;                      // [B, T, F]
  std::vector<unsigned char> hidden;      // [B, T, F]
};

Batch make_batch(std::vector<kin::MotionTensor> windows);

// Uniformly chosen motion and start frame; visibility left all-visible.
kin::MotionTensor sample_window(std::span<const kin::MotionTensor> motions,
                                std::size_t frames, std::mt19937_64& rng);

// Mask for `phase` at local step `step`, curriculum applied.
masking::MaskSpec phase_mask(const TrainPhase& phase, std::size_t step);

struct LossRecord {
  std::size_t step = 0;
  std::size_t phase = 0;
  double p_m = 0.0;
  double loss = 0.0;  // training batch loss at this step
};

struct EvalRecord {
  std::size_t step = 0;
  double loss = 0.0;   // masked loss on the eval windows
  double mpjpe = 0.0;  // mean position error over hidden joints, raw units
};

struct TrainResult {
  std::vector<LossRecord> losses;  // every step
  std::vector<EvalRecord> evals;
  std::size_t best_step = 0;
  double best_eval_loss = 0.0;
};

// Fixed eval windows: the first window of each motion with a mask drawn
// from `spec` under `seed`.
std::vector<kin::MotionTensor> eval_windows(std::span<const kin::MotionTensor> motions,
                                            const masking::MaskSpec& spec,
                                            std::size_t frames, std::size_t limit,
                                            const model::PatchScheme& scheme,
                                            std::uint64_t seed);

EvalRecord evaluate(const model::UnimaskModel& model, std::span<const kin::MotionTensor> windows,
                    LossKind kind);

// Adam with linear warmup to a constant rate.
class Adam {
 public:
  Adam(std::vector<model::NamedParameter>& params, double lr, std::size_t warmup,
       double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  double rate(std::size_t step) const;
  // Applies the gradients currently stored on the parameters.
  void step(std::size_t step);
  // L2 norm of all current gradients.
  double grad_norm() const;

 private:
  std::vector<model::NamedParameter>* params_;
  double lr_;
  std::size_t warmup_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

using ProgressFn = std::function<void(const LossRecord&, const EvalRecord*)>;

// Trains in place. `validation` may be empty, in which case the training
// motions supply the eval windows. Throws NumericalError on a non-finite
// loss or gradient.
TrainResult train(model::UnimaskModel& model, std::span<const kin::MotionTensor> training,
                  std::span<const kin::MotionTensor> validation, const TrainConfig& config,
                  const ProgressFn& progress = {});

// CSV of the loss curve: step,phase,p_m,loss,eval_loss,eval_mpjpe.
std::string loss_csv(const TrainResult& result);

}  // namespace unimask::trainer
