#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "unimask/masking/masks.hpp"
#include "unimask/metrics/metrics.hpp"
#include "unimask/model/unimask_model.hpp"

namespace unimask::metrics {

// Scores over the hidden span of one mask length.
struct TransitionScores {
  std::size_t transition = 0;
  double mpjpe = 0.0;  // mean over hidden joints, report units
  double l2p = 0.0;
  std::optional<double> l2q;  // rotation data only
  double npss = 0.0;
};

struct MethodScores {
  std::string method;
  // One entry per horizon; empty when the horizon falls outside the hidden span.
  std::vector<std::optional<double>> horizon_mpjpe;
  std::vector<TransitionScores> transitions;
};

struct EvalReport {
  std::string mask;
  std::string fingerprint;
  std::size_t samples = 0;
  double unit_scale = 1000.0;  // MPJPE multiplier (metres -> mm)
  std::vector<double> horizons_ms;
  std::vector<MethodScores> methods;
  std::size_t npss_skipped = 0;

  // Throws NumericalError for a non-finite or negative value.
  void validate() const;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

// Long format: mask,method,metric,key,value.
std::string to_csv(std::span<const EvalReport> reports);
// Rows = methods; columns = horizons, then MPJPE/L2P/L2Q/NPSS per transition.
std::string to_table(const EvalReport& report);

// Reports sharing mask kind, horizons and transition lengths become one
// report with every method as a row; repeated method names after the first
// are dropped. Order of first appearance is kept.
std::vector<EvalReport> merge_reports(std::span<const EvalReport> reports);

struct EvalSetup {
  masking::MaskSpec mask;
  // Inbetween lengths to score; empty means {mask.transition}.
  std::vector<std::size_t> transitions;
  std::vector<double> horizons_ms = default_horizons_ms();
  // Window for non-inbetween masks; 0 covers the longest horizon.
  std::size_t window = 0;
  double unit_scale = 1000.0;
  std::uint64_t seed = 0;
  std::size_t chunk = 16;
};

nlohmann::json to_json(const EvalSetup& setup);

// Scores zero velocity, interpolation and, when given, the model on the
// first window of every test motion. Rotation data is FK-resolved through
// `topology` for the positional metrics.
EvalReport evaluate_methods(const EvalSetup& setup, std::span<const kin::MotionTensor> test,
                            const PositionStats& stats, const kin::SkeletonTopology& topology,
                            const model::UnimaskModel* model = nullptr,
                            const std::string& model_name = "unimask");

}  // namespace unimask::metrics
