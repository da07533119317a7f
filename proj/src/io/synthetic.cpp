#include "unimask/io/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "unimask/error.hpp"
#include "unimask/io/json_util.hpp"
#include "unimask/kinematics/rotation.hpp"
#include "unimask/masking/masks.hpp"

namespace unimask::io {

using nlohmann::json;

void SyntheticGaitParams::validate() const {
  if (!(gait_hz > 0.0)) throw ConfigError("synthetic gait_hz must be positive");
  for (const auto& o : oscillators) {
    if (!(o.frequency_hz > 0.0)) throw ConfigError("oscillator frequencies must be positive");
    if (o.joint >= kin::default_topology().size()) {
      throw ConfigError("oscillator joint " + std::to_string(o.joint) + " is out of range");
    }
    if (o.axis < 0 || o.axis > 2) throw ConfigError("oscillator axis must be 0, 1 or 2");
  }
  if (!(frame_rate > 0.0)) throw ConfigError("synthetic frame_rate must be positive");
  if (frames == 0) throw ConfigError("synthetic frames must be positive");
  if (!(noise_std_deg >= 0.0)) throw ConfigError("synthetic noise_std_deg must be >= 0");
  if (!(amplitude_jitter >= 0.0 && amplitude_jitter < 1.0) ||
      !(frequency_jitter >= 0.0 && frequency_jitter < 1.0)) {
    throw ConfigError("synthetic jitter must lie in [0, 1)");
  }
  if (repr != kin::Representation::kPosition3 && repr != kin::Representation::kOrtho6d) {
    throw ConfigError("synthetic data is position3 or ortho6d");
  }
}

std::vector<JointOscillator> default_gait(double f) {
  constexpr double pi = std::numbers::pi;
  return {
      {0, 1, 5.0, f, 0.0, 0.0},          {0, 2, 3.0, f, pi / 2, 0.0},
      {1, 0, 25.0, f, 0.0, 0.0},         {5, 0, 25.0, f, pi, 0.0},
      {2, 0, 20.0, f, -pi / 2, 25.0},    {6, 0, 20.0, f, pi / 2, 25.0},
      {3, 0, 10.0, f, pi / 2, 0.0},      {7, 0, 10.0, f, -pi / 2, 0.0},
      {9, 1, 4.0, f, pi, 0.0},           {10, 1, 3.0, f, pi, 0.0},
      {11, 0, 2.0, f, 0.0, 0.0},         {12, 0, 2.0, f, 0.0, 0.0},
      {15, 0, 20.0, f, pi, 0.0},         {15, 2, 0.0, f, 0.0, -70.0},
      {16, 0, 10.0, f, pi, -15.0},       {19, 0, 20.0, f, 0.0, 0.0},
      {19, 2, 0.0, f, 0.0, 70.0},        {20, 0, 10.0, f, 0.0, -15.0},
  };
}

json to_json(const SyntheticGaitParams& p) {
  json osc = json::array();
  for (const auto& o : p.oscillators) {
    osc.push_back({{"joint", o.joint},
                   {"axis", o.axis},
                   {"amplitude_deg", o.amplitude_deg},
                   {"frequency_hz", o.frequency_hz},
                   {"phase", o.phase},
                   {"bias_deg", o.bias_deg}});
  }
  return {{"oscillators", osc},
          {"gait_hz", p.gait_hz},
          {"root_speed", p.root_speed},
          {"root_bob", p.root_bob},
          {"noise_std_deg", p.noise_std_deg},
          {"amplitude_jitter", p.amplitude_jitter},
          {"frequency_jitter", p.frequency_jitter},
          {"frame_rate", p.frame_rate},
          {"frames", p.frames},
          {"count", p.count},
          {"seed", p.seed},
          {"repr", std::string(kin::to_string(p.repr))}};
}

SyntheticGaitParams synthetic_params_from_json(const json& j) {
  const std::string what = "synthetic params";
  reject_unknown_keys(j,
                      {"oscillators", "gait_hz", "root_speed", "root_bob", "noise_std_deg",
                       "amplitude_jitter", "frequency_jitter", "frame_rate", "frames", "count",
                       "seed", "repr"},
                      what);
  SyntheticGaitParams p;
  read_key(j, "gait_hz", p.gait_hz, what);
  read_key(j, "root_speed", p.root_speed, what);
  read_key(j, "root_bob", p.root_bob, what);
  read_key(j, "noise_std_deg", p.noise_std_deg, what);
  read_key(j, "amplitude_jitter", p.amplitude_jitter, what);
  read_key(j, "frequency_jitter", p.frequency_jitter, what);
  read_key(j, "frame_rate", p.frame_rate, what);
  read_key(j, "frames", p.frames, what);
  read_key(j, "count", p.count, what);
  read_key(j, "seed", p.seed, what);
  std::string repr(kin::to_string(p.repr));
  read_key(j, "repr", repr, what);
  try {
    p.repr = kin::parse_representation(repr);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("oscillators")) {
    for (const auto& oj : j.at("oscillators")) {
      const std::string ow = "oscillator";
      reject_unknown_keys(oj, {"joint", "axis", "amplitude_deg", "frequency_hz", "phase", "bias_deg"},
                          ow);
      JointOscillator o;
      read_key(oj, "joint", o.joint, ow);
      read_key(oj, "axis", o.axis, ow);
      read_key(oj, "amplitude_deg", o.amplitude_deg, ow);
      read_key(oj, "frequency_hz", o.frequency_hz, ow);
      read_key(oj, "phase", o.phase, ow);
      read_key(oj, "bias_deg", o.bias_deg, ow);
      p.oscillators.push_back(o);
    }
  }
  p.validate();
  return p;
}

namespace {

class Draws {
 public:
  Draws(std::uint64_t seed, std::uint64_t split, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index)};
    rng_.seed(seq);
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * masking::unit_uniform(rng_()); }
  double normal() {
    const double u1 = 1.0 - masking::unit_uniform(rng_());
    const double u2 = masking::unit_uniform(rng_());
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<kin::MotionTensor> generate_gait(const SyntheticGaitParams& params,
                                             std::uint64_t split) {
  params.validate();
  const auto& topo = kin::default_topology();
  const std::size_t J = topo.size(), T = params.frames;
  const auto oscillators =
      params.oscillators.empty() ? default_gait(params.gait_hz) : params.oscillators;
  const Eigen::Vector3d axes[3] = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                   Eigen::Vector3d::UnitZ()};
  constexpr double deg = std::numbers::pi / 180.0;

  std::vector<kin::MotionTensor> out;
  out.reserve(params.count);
  for (std::size_t i = 0; i < params.count; ++i) {
    Draws draw(params.seed, split, i);
    const double rate = 1.0 + draw.uniform(-params.frequency_jitter, params.frequency_jitter);
    const double t0 = draw.uniform(0.0, 10.0);
    std::vector<double> amp(oscillators.size());
    for (std::size_t k = 0; k < oscillators.size(); ++k) {
      amp[k] = oscillators[k].amplitude_deg *
               (1.0 + draw.uniform(-params.amplitude_jitter, params.amplitude_jitter));
    }

    std::vector<kin::Quaternion> rotations(T * J);
    std::vector<kin::Vec3> root(T);
    for (std::size_t t = 0; t < T; ++t) {
      const double time = static_cast<double>(t) / params.frame_rate + t0;
      for (std::size_t k = 0; k < oscillators.size(); ++k) {
        const auto& o = oscillators[k];
        double angle =
            o.bias_deg + amp[k] * std::sin(2.0 * std::numbers::pi * o.frequency_hz * rate * time +
                                           o.phase);
        if (params.noise_std_deg > 0.0) angle += params.noise_std_deg * draw.normal();
        auto& q = rotations[t * J + o.joint];
        q = q * kin::Quaternion::from_axis_angle(axes[o.axis], angle * deg);
      }
      const double elapsed = static_cast<double>(t) / params.frame_rate;
      root[t] = {0.0,
                 0.94 + params.root_bob * std::sin(4.0 * std::numbers::pi * params.gait_hz *
                                                   rate * time),
                 params.root_speed * rate * elapsed};
    }

    if (params.repr == kin::Representation::kPosition3) {
      auto m = kin::MotionTensor::zeros(T, J, kin::Representation::kPosition3, params.frame_rate);
      m.values = kin::forward_kinematics(topo, rotations, root);
      out.push_back(std::move(m));
    } else {
      auto m = kin::MotionTensor::zeros(T, J, kin::Representation::kOrtho6d, params.frame_rate);
      for (std::size_t k = 0; k < T * J; ++k) {
        const auto r6 = kin::matrix_to_rot6d(rotations[k].to_matrix());
        std::copy(r6.begin(), r6.end(), m.values.begin() + static_cast<std::ptrdiff_t>(k * 6));
      }
      std::vector<double> rt;
      rt.reserve(T * 3);
      for (const auto& r : root) rt.insert(rt.end(), {r.x(), r.y(), r.z()});
      m.root_translation = std::move(rt);
      out.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace unimask::io
