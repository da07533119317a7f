#include "unimask/metrics/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "unimask/error.hpp"
#include "unimask/model/config.hpp"
#include "unimask/trainer/trainer.hpp"

namespace unimask::metrics {

using nlohmann::json;

namespace {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_value(double v, const std::string& what) {
  if (!std::isfinite(v) || v < 0.0) {
    throw NumericalError("eval report: " + what + " = " + std::to_string(v));
  }
}

kin::MotionTensor crop(const kin::MotionTensor& m, std::size_t frames) {
  if (m.frames < frames) {
    throw DataError("test motion has " + std::to_string(m.frames) + " frames, the eval window needs " +
                    std::to_string(frames));
  }
  auto out = kin::MotionTensor::zeros(frames, m.joints, m.repr, m.frame_rate);
  const std::size_t P = m.pose_dim();
  std::copy_n(m.values.begin(), frames * P, out.values.begin());
  if (m.root_translation) {
    out.root_translation =
        std::vector<double>(m.root_translation->begin(), m.root_translation->begin() + 3 * frames);
  }
  return out;
}

std::string format_value(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", *v);
  return buf;
}

}  // namespace

void EvalReport::validate() const {
  for (const auto& m : methods) {
    for (const auto& h : m.horizon_mpjpe) {
      if (h) check_value(*h, m.method + " horizon mpjpe");
    }
    for (const auto& t : m.transitions) {
      check_value(t.mpjpe, m.method + " mpjpe");
      check_value(t.l2p, m.method + " l2p");
      if (t.l2q) check_value(*t.l2q, m.method + " l2q");
      check_value(t.npss, m.method + " npss");
    }
  }
}

json to_json(const EvalReport& r) {
  json methods = json::array();
  for (const auto& m : r.methods) {
    json horizons = json::array();
    for (const auto& h : m.horizon_mpjpe) horizons.push_back(h ? json(*h) : json(nullptr));
    json transitions = json::array();
    for (const auto& t : m.transitions) {
      transitions.push_back({{"transition", t.transition},
                             {"mpjpe", t.mpjpe},
                             {"l2p", t.l2p},
                             {"l2q", t.l2q ? json(*t.l2q) : json(nullptr)},
                             {"npss", t.npss}});
    }
    methods.push_back(
        {{"method", m.method}, {"horizon_mpjpe", horizons}, {"transitions", transitions}});
  }
  return {{"mask", r.mask},         {"fingerprint", r.fingerprint}, {"samples", r.samples},
          {"unit_scale", r.unit_scale}, {"horizons_ms", r.horizons_ms}, {"methods", methods},
          {"npss_skipped", r.npss_skipped}};
}

EvalReport eval_report_from_json(const json& j) {
  try {
    EvalReport r;
    r.mask = j.at("mask").get<std::string>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.samples = j.at("samples").get<std::size_t>();
    r.unit_scale = j.at("unit_scale").get<double>();
    r.horizons_ms = j.at("horizons_ms").get<std::vector<double>>();
    r.npss_skipped = j.value("npss_skipped", std::size_t{0});
    for (const auto& jm : j.at("methods")) {
      MethodScores m;
      m.method = jm.at("method").get<std::string>();
      for (const auto& h : jm.at("horizon_mpjpe")) {
        m.horizon_mpjpe.push_back(h.is_null() ? std::nullopt : std::optional(h.get<double>()));
      }
      for (const auto& jt : jm.at("transitions")) {
        TransitionScores t;
        t.transition = jt.at("transition").get<std::size_t>();
        t.mpjpe = jt.at("mpjpe").get<double>();
        t.l2p = jt.at("l2p").get<double>();
        if (!jt.at("l2q").is_null()) t.l2q = jt.at("l2q").get<double>();
        t.npss = jt.at("npss").get<double>();
        m.transitions.push_back(t);
      }
      r.methods.push_back(std::move(m));
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("eval report: ") + e.what());
  }
}

std::string to_csv(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out.precision(17);
  out << "mask,method,metric,key,value\n";
  for (const auto& r : reports) {
    for (const auto& m : r.methods) {
      for (std::size_t h = 0; h < m.horizon_mpjpe.size(); ++h) {
        if (!m.horizon_mpjpe[h]) continue;
        out << r.mask << ',' << m.method << ",mpjpe_ms," << r.horizons_ms[h] << ','
            << *m.horizon_mpjpe[h] << '\n';
      }
      for (const auto& t : m.transitions) {
        out << r.mask << ',' << m.method << ",mpjpe," << t.transition << ',' << t.mpjpe << '\n';
        out << r.mask << ',' << m.method << ",l2p," << t.transition << ',' << t.l2p << '\n';
        if (t.l2q) out << r.mask << ',' << m.method << ",l2q," << t.transition << ',' << *t.l2q << '\n';
        out << r.mask << ',' << m.method << ",npss," << t.transition << ',' << t.npss << '\n';
      }
    }
  }
  return out.str();
}

std::string to_table(const EvalReport& r) {
  std::vector<std::string> header{"method"};
  for (double ms : r.horizons_ms) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%gms", ms);
    header.emplace_back(buf);
  }
  std::vector<std::size_t> lengths;
  if (!r.methods.empty()) {
    for (const auto& t : r.methods.front().transitions) lengths.push_back(t.transition);
  }
  for (std::size_t L : lengths) {
    for (const char* name : {"MPJPE", "L2P", "L2Q", "NPSS"}) {
      header.push_back(std::string(name) + "@" + std::to_string(L));
    }
  }
  std::vector<std::vector<std::string>> rows{header};
  for (const auto& m : r.methods) {
    std::vector<std::string> row{m.method};
    for (std::size_t h = 0; h < r.horizons_ms.size(); ++h) {
      row.push_back(format_value(h < m.horizon_mpjpe.size() ? m.horizon_mpjpe[h] : std::nullopt));
    }
    for (const auto& t : m.transitions) {
      row.push_back(format_value(t.mpjpe));
      row.push_back(format_value(t.l2p));
      row.push_back(format_value(t.l2q));
      row.push_back(format_value(t.npss));
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], row[c].size());
    }
  }
  std::ostringstream out;
  out << "mask " << r.mask << ", " << r.samples << " samples, MPJPE in mm, fingerprint "
      << r.fingerprint << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) {
      if (c) out << "  ";
      out << (c ? std::string(width[c] - row[c].size(), ' ') + row[c]
                : row[c] + std::string(width[c] - row[c].size(), ' '));
    }
    out << '\n';
  }
  return out.str();
}

std::vector<EvalReport> merge_reports(std::span<const EvalReport> reports) {
  auto lengths = [](const EvalReport& r) {
    std::vector<std::size_t> out;
    if (!r.methods.empty()) {
      for (const auto& t : r.methods.front().transitions) out.push_back(t.transition);
    }
    return out;
  };
  std::vector<EvalReport> merged;
  for (const auto& r : reports) {
    EvalReport* into = nullptr;
    for (auto& m : merged) {
      if (m.mask == r.mask && m.horizons_ms == r.horizons_ms && lengths(m) == lengths(r)) {
        into = &m;
        break;
      }
    }
    if (!into) {
      merged.push_back(r);
      continue;
    }
    for (const auto& method : r.methods) {
      bool seen = false;
      for (const auto& have : into->methods) seen |= have.method == method.method;
      if (!seen) into->methods.push_back(method);
    }
    into->fingerprint += "+" + r.fingerprint;
    into->samples = std::max(into->samples, r.samples);
    into->npss_skipped += r.npss_skipped;
  }
  return merged;
}

json to_json(const EvalSetup& s) {
  return {{"mask", trainer::to_json(s.mask)}, {"transitions", s.transitions},
          {"horizons_ms", s.horizons_ms},     {"window", s.window},
          {"unit_scale", s.unit_scale},       {"seed", s.seed}};
}

EvalReport evaluate_methods(const EvalSetup& setup, std::span<const kin::MotionTensor> test,
                            const PositionStats& stats, const kin::SkeletonTopology& topology,
                            const model::UnimaskModel* model, const std::string& model_name) {
  if (test.empty()) throw DataError("evaluation needs at least one test motion");
  if (setup.chunk == 0) throw ConfigError("eval chunk must be positive");
  const bool inbetween = setup.mask.kind == masking::MaskKind::kInbetween;
  const double fps = test[0].frame_rate;
  const std::size_t first_hidden = inbetween ? setup.mask.past : setup.mask.observed;
  const auto horizon_idx = horizon_frames(setup.horizons_ms, fps, first_hidden);

  std::vector<std::size_t> lengths = setup.transitions;
  if (lengths.empty() || !inbetween) lengths = {setup.mask.transition};
  std::size_t window = setup.window;
  if (!inbetween && window == 0) {
    window = first_hidden + 1;
    for (std::size_t f : horizon_idx) window = std::max(window, f + 1);
  }
  const auto scheme = model ? model->scheme()
                            : model::PatchScheme::make(model::PatchVariant::kFiveParts, topology);

  EvalReport report;
  report.mask = std::string(masking::to_string(setup.mask.kind));
  report.samples = test.size();
  report.unit_scale = setup.unit_scale;
  report.horizons_ms = setup.horizons_ms;
  std::vector<std::string> names{"zero_velocity", "interpolation"};
  if (model) names.push_back(model_name);
  for (const auto& n : names) report.methods.push_back({n, {}, {}});

  for (std::size_t li = 0; li < lengths.size(); ++li) {
    auto spec = setup.mask;
    spec.transition = lengths[li];
    const std::size_t frames = inbetween ? spec.window_frames(0) : window;
    const FrameRange span{first_hidden, inbetween ? first_hidden + spec.transition : frames};
    if (span.begin >= span.end || span.end > frames) {
      throw ConfigError("eval mask leaves no hidden frames inside the window");
    }
    std::vector<kin::MotionTensor> truth;
    truth.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      auto w = crop(test[i], frames);
      w.visibility = masking::make_mask(spec, frames, scheme, setup.seed + i);
      truth.push_back(std::move(w));
    }

    std::vector<std::vector<kin::MotionTensor>> preds(names.size());
    for (const auto& w : truth) {
      preds[0].push_back(baseline_zero_velocity(w));
      preds[1].push_back(baseline_interpolation(w));
    }
    if (model) {
      for (std::size_t b = 0; b < truth.size(); b += setup.chunk) {
        const std::size_t e = std::min(truth.size(), b + setup.chunk);
        auto out = model->predict(std::span(truth).subspan(b, e - b));
        for (auto& m : out) preds[2].push_back(std::move(m));
      }
    }

    std::vector<kin::MotionTensor> truth_pos;
    for (const auto& w : truth) truth_pos.push_back(kin::to_positions(topology, w));
    const bool rotations = truth[0].repr == kin::Representation::kOrtho6d;
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::vector<kin::MotionTensor> pos;
      for (const auto& p : preds[k]) pos.push_back(kin::to_positions(topology, p));
      TransitionScores t;
      t.transition = spec.transition;
      t.mpjpe = setup.unit_scale * mpjpe_hidden(pos, truth_pos);
      t.l2p = l2p(pos, truth_pos, stats, span);
      if (rotations) t.l2q = l2q(preds[k], truth, span);
      const auto n = npss(preds[k], truth, span);
      t.npss = n.value;
      if (k == 0) report.npss_skipped += n.skipped;
      report.methods[k].transitions.push_back(t);

      if (spec.transition == setup.mask.transition && report.methods[k].horizon_mpjpe.empty()) {
        for (std::size_t h = 0; h < horizon_idx.size(); ++h) {
          const std::size_t f = horizon_idx[h];
          if (f < span.begin || f >= span.end) {
            report.methods[k].horizon_mpjpe.push_back(std::nullopt);
          } else {
            const std::size_t one[] = {f};
            report.methods[k].horizon_mpjpe.push_back(setup.unit_scale *
                                                      mpjpe(pos, truth_pos, one)[0]);
          }
        }
      }
    }
  }

  for (auto& m : report.methods) m.horizon_mpjpe.resize(setup.horizons_ms.size());

  std::string source = to_json(setup).dump();
  if (model) {
    source += model::to_json(model->config()).dump();
    double checksum = 0.0;
    for (const auto& p : model->parameters()) {
      for (double v : p.tensor.values()) checksum += v;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", checksum);
    source += buf;
  }
  report.fingerprint = fnv1a_hex(source);
  report.validate();
  return report;
}

}  // namespace unimask::metrics
