#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "unimask/cli/commands.hpp"
#include "unimask/error.hpp"
#include "unimask/numkit/tensor.hpp"

namespace fs = std::filesystem;
using namespace unimask;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mask;
  std::optional<double> p;
  std::optional<std::size_t> transition;
  std::optional<std::string> checkpoint;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Flags& f, bool with_mask) {
  cmd->add_option("--config", f.config, "Run config (JSON)");
  cmd->add_option("--seed", f.seed, "Seed for init, sampling and masks");
  cmd->add_option("--out", f.out, "Output path");
  if (with_mask) {
    cmd->add_option("--mask", f.mask, "Mask kind")
        ->check(CLI::IsMember({"forecast", "inbetween", "completion", "occlusion"}));
    cmd->add_option("--p", f.p, "Mask probability (completion / occlusion)");
    cmd->add_option("--transition", f.transition, "Inbetween transition length");
  }
}

cli::RunConfig resolve(const Flags& f) {
  cli::RunConfig config;
  if (!f.config.empty()) config = cli::load_run_config(f.config);
  cli::Overrides o;
  o.seed = f.seed;
  o.mask = f.mask;
  o.p = f.p;
  o.transition = f.transition;
  if (f.out) o.out = *f.out;
  cli::apply_overrides(config, o);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  nk::tune_allocator();
  CLI::App app{"Masked-autoencoder motion synthesis: data, training, evaluation"};
  app.require_subcommand(1);

  Flags gen_f, train_f, eval_f, synth_f, mask_f;
  auto* gen = app.add_subcommand("gen-synthetic", "Write the synthetic gait dataset");
  add_common(gen, gen_f, false);

  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train, train_f, true);

  auto* eval = app.add_subcommand("eval", "Score the baselines and optionally a checkpoint");
  add_common(eval, eval_f, true);
  eval->add_option("--checkpoint", eval_f.checkpoint, "Model checkpoint");

  std::string input;
  auto* synth = app.add_subcommand("synthesize", "Complete a masked motion file");
  add_common(synth, synth_f, true);
  synth->add_option("--checkpoint", synth_f.checkpoint, "Model checkpoint")->required();
  synth->add_option("--input", input, "Motion file")->required();

  std::size_t frames = 0;
  auto* maskgen = app.add_subcommand("maskgen", "Write a mask for inspection");
  add_common(maskgen, mask_f, true);
  maskgen->add_option("--frames", frames, "Window length (default from the mask)");

  std::vector<std::string> reports;
  std::string report_out = ".";
  auto* report = app.add_subcommand("report", "Merge eval reports into one table");
  report->add_option("reports", reports, "report.json files")->required();
  report->add_option("--out", report_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsage;
  }

  try {
    if (*gen) {
      const auto config = resolve(gen_f);
      cli::cmd_gen_synthetic(config, config.output_dir);
    } else if (*train) {
      const auto config = resolve(train_f);
      cli::cmd_train(config, config.output_dir, std::cout);
    } else if (*eval) {
      const auto config = resolve(eval_f);
      std::optional<fs::path> ckpt;
      if (eval_f.checkpoint) ckpt = *eval_f.checkpoint;
      cli::cmd_eval(config, ckpt, config.output_dir, std::cout);
    } else if (*synth) {
      const auto config = resolve(synth_f);
      if (!synth_f.out) throw ConfigError("synthesize needs --out");
      cli::cmd_synthesize(config, *synth_f.checkpoint, input, *synth_f.out, synth_f.mask.has_value());
    } else if (*maskgen) {
      const auto config = resolve(mask_f);
      if (!mask_f.out) throw ConfigError("maskgen needs --out");
      cli::cmd_maskgen(config, frames, *mask_f.out);
    } else if (*report) {
      std::vector<fs::path> paths(reports.begin(), reports.end());
      cli::cmd_report(paths, report_out, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
  return cli::kOk;
}
