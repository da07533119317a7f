#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#include "unimask/cli/commands.hpp"
#include "unimask/cli/run_config.hpp"
#include "unimask/error.hpp"
#include "unimask/io/files.hpp"
#include "unimask/io/motion_file.hpp"
#include "unimask/model/checkpoint.hpp"

using namespace unimask;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("unimask_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json small_config(const fs::path& out) {
  return {{"schema_version", 1},
          {"seed", 3},
          {"model", {{"width", 16}, {"encoder_depth", 1}, {"decoder_depth", 1}, {"heads", 2}}},
          {"train",
           {{"batch_size", 2}, {"learning_rate", 1e-3}, {"warmup_steps", 2}, {"eval_every", 5},
            {"eval_windows", 4}}},
          {"mask", {{"kind", "inbetween"}, {"past", 4}, {"transition", 6}, {"future", 1}}},
          {"eval", {{"transitions", {3, 6}}}},
          {"data",
           {{"source", "synthetic"},
            {"synthetic", {{"count", 6}, {"frames", 24}, {"noise_std_deg", 0.0}}},
            {"test_count", 3}}},
          {"output_dir", out.string()}};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(UNIMASK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("run config round trip and schema checks") {
  const auto c = cli::run_config_from_json(small_config("runs/x"));
  CHECK(c.seed == 3);
  CHECK(c.train.seed == 3);
  CHECK(c.model.init_seed == 3);
  CHECK(c.eval.seed == 3);
  CHECK(c.train.phases.size() == 1);
  CHECK(c.train.phases[0].mask.kind == masking::MaskKind::kInbetween);
  CHECK(c.eval.mask.transition == 6);
  const auto back = cli::run_config_from_json(cli::to_json(c));
  CHECK(cli::to_json(back) == cli::to_json(c));

  auto bad = small_config("x");
  bad["extra"] = 1;
  CHECK_THROWS_AS(cli::run_config_from_json(bad), ConfigError);
  bad = small_config("x");
  bad["data"]["synthetic"]["amplitude"] = 1.0;
  CHECK_THROWS_AS(cli::run_config_from_json(bad), ConfigError);
  bad = small_config("x");
  bad["model"]["widht"] = 8;
  CHECK_THROWS_AS(cli::run_config_from_json(bad), ConfigError);
  bad = small_config("x");
  bad.erase("schema_version");
  CHECK_THROWS_AS(cli::run_config_from_json(bad), ConfigError);
  bad = small_config("x");
  bad["schema_version"] = 2;
  CHECK_THROWS_AS(cli::run_config_from_json(bad), ConfigError);
  bad = small_config("x");
  bad["data"] = {{"source", "motion_dir"}};
  CHECK_THROWS_AS(cli::run_config_from_json(bad), ConfigError);
}

TEST_CASE("flags override the file") {
  auto c = cli::run_config_from_json(small_config("runs/x"));
  cli::Overrides o;
  o.seed = 11;
  o.mask = "occlusion";
  o.p = 0.2;
  o.out = "elsewhere";
  cli::apply_overrides(c, o);
  CHECK(c.train.seed == 11);
  CHECK(c.mask.kind == masking::MaskKind::kOcclusion);
  CHECK(c.train.phases[0].mask.kind == masking::MaskKind::kOcclusion);
  CHECK(c.train.phases[0].mask.probability == 0.2);
  CHECK(c.eval.mask.probability == 0.2);
  CHECK(c.output_dir == "elsewhere");
  o = {};
  o.p = 1.5;
  CHECK_THROWS_AS(cli::apply_overrides(c, o), ConfigError);
  o = {};
  o.mask = "sideways";
  CHECK_THROWS_AS(cli::apply_overrides(c, o), ConfigError);

  // Explicit phases keep their own masks.
  auto j = small_config("x");
  j["train"]["phases"] = {{{"steps", 10}, {"mask", {{"kind", "forecast"}, {"observed", 5}}}}};
  auto d = cli::run_config_from_json(j);
  o = {};
  o.mask = "completion";
  cli::apply_overrides(d, o);
  CHECK(d.train.phases[0].mask.kind == masking::MaskKind::kForecast);
  CHECK(d.eval.mask.kind == masking::MaskKind::kCompletion);

  // Phases without a mask follow the run mask, overrides included.
  j = small_config("x");
  j["train"]["phases"] = {{{"steps", 10}},
                          {{"steps", 5}, {"mask", {{"kind", "forecast"}, {"observed", 5}}}}};
  auto e = cli::run_config_from_json(j);
  CHECK(e.train.phases[0].mask.kind == masking::MaskKind::kInbetween);
  CHECK(e.train.phases[0].mask.transition == 6);
  CHECK(e.train.phases[1].mask.kind == masking::MaskKind::kForecast);
  o = {};
  o.transition = 9;
  cli::apply_overrides(e, o);
  CHECK(e.train.phases[0].mask.transition == 9);
  CHECK(e.train.phases[1].mask.kind == masking::MaskKind::kForecast);
  const auto back = cli::run_config_from_json(cli::to_json(e));
  CHECK_FALSE(cli::to_json(e)["train"]["phases"][0].contains("mask"));
  CHECK(cli::to_json(back) == cli::to_json(e));
}

TEST_CASE("gen-synthetic writes deterministic motion files") {
  const auto dir = scratch("gen");
  auto j = small_config(dir);
  j["data"]["synthetic"]["count"] = 10;
  j["data"]["synthetic"]["frames"] = 64;
  const auto c = cli::run_config_from_json(j);
  cli::cmd_gen_synthetic(c, dir / "a");
  cli::cmd_gen_synthetic(c, dir / "b");
  const auto files = io::list_motion_files(dir / "a" / "train");
  REQUIRE(files.size() == 10);
  CHECK(io::list_motion_files(dir / "a" / "test").size() == 3);
  for (const auto& f : files) {
    const auto m = io::read_motion_file(f);
    CHECK(m.motion.frames == 64);
    CHECK(m.motion.joints == 22);
    CHECK(io::read_file(f) == io::read_file(dir / "b" / "train" / f.filename()));
  }
  // Regenerating into an existing directory replaces the files in place.
  cli::cmd_gen_synthetic(c, dir / "a");
  CHECK(io::list_motion_files(dir / "a" / "train").size() == 10);
  std::size_t leftovers = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    leftovers += e.path().filename().string().find("staging") != std::string::npos;
  }
  CHECK(leftovers == 0);

  // The written dataset loads back as a motion directory.
  j["data"] = {{"source", "motion_dir"},
               {"train_dir", (dir / "a" / "train").string()},
               {"test_dir", (dir / "a" / "test").string()}};
  const auto data = cli::load_dataset(cli::run_config_from_json(j));
  CHECK(data.train.size() == 10);
  CHECK(data.test.size() == 3);
  fs::remove_all(dir);
}

TEST_CASE("eval on baselines only") {
  const auto dir = scratch("eval");
  const auto c = cli::run_config_from_json(small_config(dir));
  std::ostringstream log;
  const auto report = cli::cmd_eval(c, std::nullopt, dir / "out", log);
  REQUIRE(report.methods.size() == 2);
  CHECK(report.methods[0].method == "zero_velocity");
  CHECK(report.methods[1].method == "interpolation");
  CHECK(report.methods[0].transitions.size() == 2);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "report.csv"));
  CHECK(io::read_file(dir / "out" / "report.txt") == metrics::to_table(report));
  CHECK(log.str().find("interpolation") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train, eval with the checkpoint, synthesize and report") {
  const auto dir = scratch("pipeline");
  auto j = small_config(dir / "run");
  j["train"]["phases"] = {
      {{"steps", 12}, {"mask", {{"kind", "inbetween"}, {"past", 4}, {"transition", 6}, {"future", 1}}}}};
  const auto c = cli::run_config_from_json(j);
  std::ostringstream log;
  const auto r1 = cli::cmd_train(c, dir / "run", log);
  for (const char* f : {"best.ckpt", "last.ckpt", "loss.csv", "run_config.json"}) {
    CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
  }
  const auto csv = io::read_file(dir / "run" / "loss.csv");
  cli::cmd_train(c, dir / "run2", log);
  CHECK(io::read_file(dir / "run2" / "loss.csv") == csv);
  CHECK(cli::run_config_from_json(json::parse(io::read_file(dir / "run" / "run_config.json"))).seed == 3);

  const auto report = cli::cmd_eval(c, dir / "run" / "last.ckpt", dir / "run", log);
  REQUIRE(report.methods.size() == 3);
  CHECK(report.methods[2].method == "unimask");

  // All-visible input: nothing to synthesize.
  io::SyntheticGaitParams p;
  p.count = 1;
  p.frames = 11;
  io::MotionFile input{"default22", io::generate_gait(p, 7)[0]};
  io::write_motion_file(dir / "in.json", input);
  cli::cmd_synthesize(c, dir / "run" / "last.ckpt", dir / "in.json", dir / "same.json", false);
  CHECK(io::read_file(dir / "same.json") == io::read_file(dir / "in.json"));

  // Masked input: observed frames kept, hidden ones filled.
  cli::cmd_synthesize(c, dir / "run" / "last.ckpt", dir / "in.json", dir / "filled.json", true);
  const auto filled = io::read_motion_file(dir / "filled.json").motion;
  CHECK(filled.visibility.all_visible());
  for (std::size_t t : {0, 1, 2, 3, 10}) {
    for (std::size_t k = 0; k < 66; ++k) CHECK(filled.values[t * 66 + k] == input.motion.values[t * 66 + k]);
  }
  bool changed = false;
  for (std::size_t k = 4 * 66; k < 10 * 66; ++k) changed |= filled.values[k] != input.motion.values[k];
  CHECK(changed);

  cli::cmd_eval(c, std::nullopt, dir / "base", log);
  cli::cmd_report({dir / "base" / "report.json", dir / "run" / "report.json"}, dir / "merged", log);
  const auto table = io::read_file(dir / "merged" / "report.txt");
  CHECK(table.find("unimask (run)") != std::string::npos);
  CHECK(table.find("interpolation") != std::string::npos);
  const auto merged_csv = io::read_file(dir / "merged" / "report.csv");
  CHECK(merged_csv.find("unimask (run),npss,6,") != std::string::npos);
  (void)r1;
  fs::remove_all(dir);
}

TEST_CASE("maskgen writes visibility and token flags") {
  const auto dir = scratch("maskgen");
  const auto c = cli::run_config_from_json(small_config(dir));
  cli::cmd_maskgen(c, 0, dir / "mask.json");
  const auto doc = json::parse(io::read_file(dir / "mask.json"));
  CHECK(doc["T"] == 11);
  CHECK(doc["J"] == 22);
  CHECK(doc["preview"][0] == std::string(22, '#'));
  CHECK(doc["preview"][4] == std::string(22, '.'));
  CHECK(doc["token_visibility"][4].size() == 5);
  fs::remove_all(dir);
}

TEST_CASE("exit codes of the binary") {
  const auto dir = scratch("exit");
  io::write_file_atomic(dir / "ok.json", small_config(dir / "out").dump());
  auto bad = small_config(dir / "out");
  bad["unknown"] = true;
  io::write_file_atomic(dir / "bad.json", bad.dump());
  auto missing = small_config(dir / "out");
  missing["data"] = {{"source", "motion_dir"},
                     {"train_dir", (dir / "none").string()},
                     {"test_dir", (dir / "none").string()}};
  io::write_file_atomic(dir / "missing.json", missing.dump());
  auto diverge = small_config(dir / "out");
  diverge["train"]["learning_rate"] = 1e200;
  diverge["train"]["warmup_steps"] = 0;
  io::write_file_atomic(dir / "diverge.json", diverge.dump());

  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("eval --config " + (dir / "ok.json").string()) == 0);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(run_cli("eval --config " + (dir / "bad.json").string()) == 1);
  CHECK(run_cli("eval --config " + (dir / "nope.json").string()) == 1);
  CHECK(run_cli("eval --config " + (dir / "ok.json").string() + " --mask sideways") == 1);
  CHECK(run_cli("eval --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("eval --config " + (dir / "ok.json").string() + " --checkpoint " +
                (dir / "none.ckpt").string()) == 2);
  CHECK(run_cli("train --config " + (dir / "diverge.json").string() + " --out " +
                (dir / "div").string()) == 3);
  CHECK(run_cli("maskgen --config " + (dir / "ok.json").string() + " --mask forecast --out " +
                (dir / "m.json").string()) == 0);
  fs::remove_all(dir);
}
