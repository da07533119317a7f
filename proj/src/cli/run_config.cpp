#include "unimask/cli/run_config.hpp"

#include "unimask/error.hpp"
#include "unimask/io/bvh.hpp"
#include "unimask/io/files.hpp"
#include "unimask/io/json_util.hpp"
#include "unimask/io/motion_file.hpp"

namespace unimask::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string_view to_string(DataKind kind) {
  switch (kind) {
    case DataKind::kSynthetic: return "synthetic";
    case DataKind::kMotionDir: return "motion_dir";
    case DataKind::kBvhDir: return "bvh_dir";
  }
  return "synthetic";
}

DataKind parse_data_kind(const std::string& text) {
  if (text == "synthetic") return DataKind::kSynthetic;
  if (text == "motion_dir") return DataKind::kMotionDir;
  if (text == "bvh_dir") return DataKind::kBvhDir;
  throw ConfigError("unknown data source '" + text + "' (synthetic, motion_dir, bvh_dir)");
}

DataSource data_from_json(const json& j) {
  const std::string what = "data";
  io::reject_unknown_keys(j, {"source", "synthetic", "test_count", "train_dir", "test_dir"}, what);
  DataSource d;
  std::string source = "synthetic";
  io::read_key(j, "source", source, what);
  d.kind = parse_data_kind(source);
  if (j.contains("synthetic")) d.synthetic = io::synthetic_params_from_json(j.at("synthetic"));
  io::read_key(j, "test_count", d.test_count, what);
  std::string train_dir, test_dir;
  io::read_key(j, "train_dir", train_dir, what);
  io::read_key(j, "test_dir", test_dir, what);
  d.train_dir = train_dir;
  d.test_dir = test_dir;
  if (d.kind != DataKind::kSynthetic && (d.train_dir.empty() || d.test_dir.empty())) {
    throw ConfigError("data source '" + source + "' needs train_dir and test_dir");
  }
  return d;
}

json to_json(const DataSource& d) {
  return {{"source", std::string(to_string(d.kind))},
          {"synthetic", io::to_json(d.synthetic)},
          {"test_count", d.test_count},
          {"train_dir", d.train_dir.string()},
          {"test_dir", d.test_dir.string()}};
}

void eval_from_json(const json& j, metrics::EvalSetup& e) {
  const std::string what = "eval";
  io::reject_unknown_keys(j, {"transitions", "horizons_ms", "window", "unit_scale", "chunk"}, what);
  io::read_key(j, "transitions", e.transitions, what);
  io::read_key(j, "horizons_ms", e.horizons_ms, what);
  io::read_key(j, "window", e.window, what);
  io::read_key(j, "unit_scale", e.unit_scale, what);
  io::read_key(j, "chunk", e.chunk, what);
  if (!(e.unit_scale > 0.0)) throw ConfigError("eval unit_scale must be positive");
  if (e.chunk == 0) throw ConfigError("eval chunk must be positive");
  for (double ms : e.horizons_ms) {
    if (!(ms > 0.0)) throw ConfigError("eval horizons must be positive");
  }
}

// Run-level values that feed the nested sections.
void propagate(RunConfig& c) {
  c.train.seed = c.seed;
  c.model.init_seed = c.seed;
  c.eval.seed = c.seed;
  c.eval.mask = c.mask;
  if (!c.train_phases_given) {
    c.train.phases.resize(1);
    c.phase_mask_given.clear();
  }
  c.phase_mask_given.resize(c.train.phases.size(), false);
  for (std::size_t i = 0; i < c.train.phases.size(); ++i) {
    if (!c.phase_mask_given[i]) c.train.phases[i].mask = c.mask;
  }
  c.train.validate();
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  const std::string what = "run config";
  io::reject_unknown_keys(j,
                          {"schema_version", "seed", "topology", "model", "train", "mask", "eval",
                           "data", "output_dir"},
                          what);
  if (!j.contains("schema_version")) throw ConfigError("run config needs schema_version");
  RunConfig c;
  io::read_key(j, "schema_version", c.schema_version, what);
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version) +
                      " (expected " + std::to_string(kSchemaVersion) + ")");
  }
  io::read_key(j, "seed", c.seed, what);
  if (j.contains("topology")) {
    const auto& t = j.at("topology");
    if (t.is_string()) {
      if (t.get<std::string>() != kin::default_topology().name()) {
        throw ConfigError("unknown topology '" + t.get<std::string>() + "'");
      }
    } else {
      c.topology = model::topology_from_json(t);
    }
  }
  if (j.contains("model")) c.model = model::model_config_from_json(j.at("model"));
  if (j.contains("train")) {
    c.train = trainer::train_config_from_json(j.at("train"));
    c.train_phases_given = j.at("train").contains("phases");
    if (c.train_phases_given) {
      for (const auto& pj : j.at("train").at("phases")) {
        c.phase_mask_given.push_back(pj.contains("mask"));
      }
    }
  }
  if (j.contains("mask")) c.mask = trainer::mask_spec_from_json(j.at("mask"));
  if (j.contains("eval")) eval_from_json(j.at("eval"), c.eval);
  if (j.contains("data")) c.data = data_from_json(j.at("data"));
  std::string out = c.output_dir.string();
  io::read_key(j, "output_dir", out, what);
  c.output_dir = out;
  propagate(c);
  return c;
}

json to_json(const RunConfig& c) {
  json train = trainer::to_json(c.train);
  if (!c.train_phases_given) {
    train.erase("phases");
  } else {
    for (std::size_t i = 0; i < c.phase_mask_given.size(); ++i) {
      if (!c.phase_mask_given[i]) train["phases"][i].erase("mask");
    }
  }
  train.erase("seed");
  json model = model::to_json(c.model);
  model.erase("init_seed");
  return {{"schema_version", c.schema_version},
          {"seed", c.seed},
          {"topology", c.topology ? model::to_json(*c.topology)
                                  : json(kin::default_topology().name())},
          {"model", model},
          {"train", train},
          {"mask", trainer::to_json(c.mask)},
          {"eval",
           {{"transitions", c.eval.transitions},
            {"horizons_ms", c.eval.horizons_ms},
            {"window", c.eval.window},
            {"unit_scale", c.eval.unit_scale},
            {"chunk", c.eval.chunk}}},
          {"data", to_json(c.data)},
          {"output_dir", c.output_dir.string()}};
}

RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return run_config_from_json(j);
}

void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.mask) {
    try {
      c.mask.kind = masking::parse_mask_kind(*o.mask);
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
    if (c.mask.kind == masking::MaskKind::kCustom) throw ConfigError("--mask custom is not allowed");
  }
  if (o.p) {
    if (!(*o.p >= 0.0 && *o.p <= 1.0)) throw ConfigError("--p must lie in [0, 1]");
    c.mask.probability = *o.p;
  }
  if (o.transition) c.mask.transition = *o.transition;
  if (o.out) c.output_dir = *o.out;
  propagate(c);
}

Dataset load_dataset(const RunConfig& c) {
  Dataset d;
  d.topology = c.topology ? *c.topology : kin::default_topology();
  switch (c.data.kind) {
    case DataKind::kSynthetic: {
      if (c.topology) throw ConfigError("synthetic data uses the default skeleton");
      auto params = c.data.synthetic;
      d.train = io::generate_gait(params, 0);
      params.count = c.data.test_count;
      d.test = io::generate_gait(params, 1);
      break;
    }
    case DataKind::kMotionDir: {
      auto load = [&](const fs::path& dir, std::vector<kin::MotionTensor>& into) {
        for (const auto& path : io::list_motion_files(dir)) {
          auto file = io::read_motion_file(path);
          if (file.topology != d.topology.name()) {
            throw DataError(path.string() + ": topology '" + file.topology + "', expected '" +
                            d.topology.name() + "'");
          }
          if (file.motion.joints != d.topology.size()) {
            throw DataError(path.string() + ": joint count does not match the topology");
          }
          into.push_back(std::move(file.motion));
        }
      };
      load(c.data.train_dir, d.train);
      load(c.data.test_dir, d.test);
      break;
    }
    case DataKind::kBvhDir: {
      bool first = true;
      auto load = [&](const fs::path& dir, std::vector<kin::MotionTensor>& into) {
        std::vector<fs::path> files;
        std::error_code ec;
        for (const auto& e : fs::directory_iterator(dir, ec)) {
          if (e.path().extension() == ".bvh") files.push_back(e.path());
        }
        if (ec) throw DataError("cannot list " + dir.string() + ": " + ec.message());
        std::sort(files.begin(), files.end());
        for (const auto& path : files) {
          auto bvh = io::read_bvh(path);
          if (first) {
            d.topology = bvh.topology;
            first = false;
          } else if (bvh.topology.size() != d.topology.size()) {
            throw DataError(path.string() + ": skeleton differs from the first BVH file");
          }
          into.push_back(std::move(bvh.motion));
        }
      };
      load(c.data.train_dir, d.train);
      load(c.data.test_dir, d.test);
      break;
    }
  }
  if (d.train.empty()) throw DataError("no training motions");
  if (d.test.empty()) throw DataError("no test motions");
  const auto repr = d.train[0].repr;
  const bool root = d.train[0].root_translation.has_value();
  for (const auto* set : {&d.train, &d.test}) {
    for (const auto& m : *set) {
      if (m.repr != repr || m.root_translation.has_value() != root) {
        throw DataError("motions mix representations");
      }
    }
  }
  return d;
}

}  // namespace unimask::cli
