#include "unimask/cli/commands.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "unimask/error.hpp"
#include "unimask/io/files.hpp"
#include "unimask/io/motion_file.hpp"
#include "unimask/model/checkpoint.hpp"

namespace unimask::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string motion_name(std::size_t i) {
  std::ostringstream s;
  s << "motion_" << std::setw(5) << std::setfill('0') << i << ".json";
  return s.str();
}

std::string topology_name(const RunConfig& config) {
  return config.topology ? config.topology->name() : kin::default_topology().name();
}

metrics::PositionStats train_position_stats(const Dataset& data) {
  std::vector<kin::MotionTensor> positions;
  positions.reserve(data.train.size());
  for (const auto& m : data.train) positions.push_back(kin::to_positions(data.topology, m));
  return metrics::position_stats(positions);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e)) {
    return kUsage;
  }
  if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const DegeneracyError*>(&e)) {
    return kNumerical;
  }
  return kData;
}

model::ModelConfig model_config_for(const RunConfig& config, const Dataset& data) {
  model::ModelConfig m = config.model;
  m.repr = data.train[0].repr;
  m.root_translation = data.train[0].root_translation.has_value();
  if (m.use_temp_mlp && m.frames == 0) {
    m.frames = config.train.phases.front().mask.window_frames(config.train.window);
  }
  m.validate();
  return m;
}

void cmd_gen_synthetic(const RunConfig& config, const fs::path& out) {
  if (config.data.kind != DataKind::kSynthetic) {
    throw ConfigError("gen-synthetic needs a synthetic data source");
  }
  const auto data = load_dataset(config);
  const std::string topology = kin::default_topology().name();
  io::StagedDirectory stage(out);
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    io::write_motion_file(stage.path() / "train" / motion_name(i), {topology, data.train[i]});
  }
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    io::write_motion_file(stage.path() / "test" / motion_name(i), {topology, data.test[i]});
  }
  json params = {{"synthetic", io::to_json(config.data.synthetic)},
                 {"test_count", config.data.test_count}};
  io::write_file_atomic(stage.path() / "params.json", params.dump(2) + "\n");
  stage.publish();
}

trainer::TrainResult cmd_train(const RunConfig& config, const fs::path& out, std::ostream& log) {
  const auto data = load_dataset(config);
  model::UnimaskModel model(model_config_for(config, data), data.topology);
  auto train = config.train;
  train.output_dir = out;
  log << "training " << model.parameter_count() << " parameters for " << train.total_steps()
      << " steps on " << data.train.size() << " motions\n";
  const auto result = trainer::train(
      model, data.train, data.test, train,
      [&](const trainer::LossRecord& rec, const trainer::EvalRecord* eval) {
        if (!eval) return;
        log << "step " << eval->step;
        if (std::isfinite(rec.loss)) log << "  loss " << rec.loss;
        log << "  eval " << eval->loss
            << "  mpjpe " << eval->mpjpe << '\n';
        log.flush();
      });
  io::write_file_atomic(out / "run_config.json", to_json(config).dump(2) + "\n");
  log << "best eval loss " << result.best_eval_loss << " at step " << result.best_step << '\n';
  return result;
}

metrics::EvalReport cmd_eval(const RunConfig& config, const std::optional<fs::path>& checkpoint,
                             const fs::path& out, std::ostream& log) {
  const auto data = load_dataset(config);
  std::optional<model::UnimaskModel> model;
  if (checkpoint) {
    model.emplace(model::load_checkpoint(*checkpoint));
    const auto& mc = model->config();
    if (mc.repr != data.test[0].repr ||
        mc.root_translation != data.test[0].root_translation.has_value() ||
        model->topology().size() != data.topology.size()) {
      throw DataError("checkpoint " + checkpoint->string() + " does not match the test data");
    }
  }
  auto report = metrics::evaluate_methods(config.eval, data.test, train_position_stats(data),
                                          data.topology, model ? &*model : nullptr);
  if (report.npss_skipped > 0) {
    log << "warning: NPSS skipped " << report.npss_skipped
        << " ground-truth features with zero power\n";
  }
  const std::vector<metrics::EvalReport> one{report};
  io::write_file_atomic(out / "report.json", metrics::to_json(report).dump(2) + "\n");
  io::write_file_atomic(out / "report.csv", metrics::to_csv(one));
  const auto table = metrics::to_table(report);
  io::write_file_atomic(out / "report.txt", table);
  log << table;
  return report;
}

void cmd_synthesize(const RunConfig& config, const fs::path& checkpoint, const fs::path& input,
                    const fs::path& out, bool apply_mask) {
  auto file = io::read_motion_file(input);
  const auto model = model::load_checkpoint(checkpoint);
  if (file.motion.joints != model.topology().size() || file.motion.repr != model.config().repr ||
      file.motion.root_translation.has_value() != model.config().root_translation) {
    throw DataError(input.string() + " does not match the checkpoint's skeleton or representation");
  }
  if (apply_mask) {
    file.motion.visibility =
        masking::make_mask(config.mask, file.motion.frames, model.scheme(), config.seed);
  }
  if (file.motion.visibility.all_visible()) {
    io::write_motion_file(out, file);
    return;
  }
  const std::vector<kin::MotionTensor> batch{file.motion};
  auto completed = model.predict(batch).front();
  completed.visibility = kin::VisibilityMask(completed.frames, completed.joints);
  io::write_motion_file(out, {file.topology, std::move(completed)});
}

void cmd_maskgen(const RunConfig& config, std::size_t frames, const fs::path& out) {
  const auto& topology = config.topology ? *config.topology : kin::default_topology();
  const auto scheme = model::make_scheme(config.model, topology);
  if (frames == 0) {
    if (config.mask.kind == masking::MaskKind::kInbetween) {
      frames = config.mask.window_frames(0);
    } else {
      frames = config.train.window;
    }
  }
  const auto vis = masking::make_mask(config.mask, frames, scheme, config.seed);
  const auto tokens = masking::patchify_mask(vis, scheme);
  json rows = json::array(), token_rows = json::array(), preview = json::array();
  for (std::size_t t = 0; t < vis.frames; ++t) {
    std::vector<int> row(vis.joints), trow(tokens.patches);
    std::string line;
    for (std::size_t j = 0; j < vis.joints; ++j) {
      row[j] = vis.visible(t, j) ? 1 : 0;
      line += vis.visible(t, j) ? '#' : '.';
    }
    for (std::size_t l = 0; l < tokens.patches; ++l) trow[l] = tokens.visible(t, l) ? 1 : 0;
    rows.push_back(row);
    token_rows.push_back(trow);
    preview.push_back(line);
  }
  json doc = {{"version", 1},
              {"topology", topology_name(config)},
              {"mask", trainer::to_json(config.mask)},
              {"seed", config.seed},
              {"T", vis.frames},
              {"J", vis.joints},
              {"visibility", rows},
              {"patches", scheme.names()},
              {"token_visibility", token_rows},
              {"preview", preview}};
  io::write_file_atomic(out, doc.dump(1) + "\n");
}

void cmd_report(const std::vector<fs::path>& reports, const fs::path& out, std::ostream& log) {
  if (reports.empty()) throw ConfigError("report needs at least one report.json");
  std::vector<metrics::EvalReport> loaded;
  for (const auto& path : reports) {
    json j;
    try {
      j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    auto r = metrics::eval_report_from_json(j);
    // Model rows are labelled by their run directory.
    const std::string label = path.parent_path().filename().string();
    for (auto& m : r.methods) {
      if (m.method != "zero_velocity" && m.method != "interpolation" && !label.empty()) {
        m.method += " (" + label + ")";
      }
    }
    loaded.push_back(std::move(r));
  }
  const auto merged = metrics::merge_reports(loaded);
  std::string text;
  for (const auto& r : merged) text += metrics::to_table(r) + "\n";
  io::write_file_atomic(out / "report.txt", text);
  io::write_file_atomic(out / "report.csv", metrics::to_csv(merged));
  log << text;
}

}  // namespace unimask::cli
