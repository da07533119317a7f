#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "unimask/cli/run_config.hpp"
#include "unimask/metrics/report.hpp"
#include "unimask/model/unimask_model.hpp"

// The subcommands behind tools/unimask_cli. Every output file is written
// atomically.
namespace unimask::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Maps library exceptions onto exit codes.
int exit_code_for(const std::exception& e);

// <out>/train/*.json, <out>/test/*.json and <out>/params.json.
void cmd_gen_synthetic(const RunConfig& config, const std::filesystem::path& out);

// <out>/best.ckpt, last.ckpt, loss.csv and run_config.json. The model's
// representation follows the data.
trainer::TrainResult cmd_train(const RunConfig& config, const std::filesystem::path& out,
                               std::ostream& log);

// Baselines plus the checkpoint's model when given. Writes
// <out>/report.json, report.csv and report.txt.
metrics::EvalReport cmd_eval(const RunConfig& config,
                             const std::optional<std::filesystem::path>& checkpoint,
                             const std::filesystem::path& out, std::ostream& log);

// Completes the motion file `input`. With `apply_mask` the configured mask
// replaces the file's visibility.
void cmd_synthesize(const RunConfig& config, const std::filesystem::path& checkpoint,
                    const std::filesystem::path& input, const std::filesystem::path& out,
                    bool apply_mask);

// Visibility of the configured mask over `frames` frames (0: the mask's own
// window) as JSON with a text preview.
void cmd_maskgen(const RunConfig& config, std::size_t frames, const std::filesystem::path& out);

// Merges eval reports into <out>/report.txt and <out>/report.csv.
void cmd_report(const std::vector<std::filesystem::path>& reports,
                const std::filesystem::path& out, std::ostream& log);

// Model config with representation, root translation and window length
// taken from the data.
model::ModelConfig model_config_for(const RunConfig& config, const Dataset& data);

}  // namespace unimask::cli
