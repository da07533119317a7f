#include "unimask/io/motion_file.hpp"

#include <algorithm>

#include "unimask/error.hpp"
#include "unimask/io/files.hpp"

namespace unimask::io {

namespace fs = std::filesystem;
using nlohmann::json;

json motion_to_json(const MotionFile& file) {
  const auto& m = file.motion;
  m.validate();
  const std::size_t P = m.pose_dim();
  json values = json::array();
  for (std::size_t t = 0; t < m.frames; ++t) {
    values.push_back(std::vector<double>(m.values.begin() + static_cast<std::ptrdiff_t>(t * P),
                                         m.values.begin() + static_cast<std::ptrdiff_t>((t + 1) * P)));
  }
  json j = {{"version", kMotionFileVersion},
            {"topology", file.topology},
            {"frame_rate", m.frame_rate},
            {"repr", std::string(kin::to_string(m.repr))},
            {"T", m.frames},
            {"J", m.joints},
            {"n", m.channels()},
            {"values", std::move(values)}};
  if (!m.visibility.all_visible()) {
    json rows = json::array();
    for (std::size_t t = 0; t < m.frames; ++t) {
      std::vector<int> row(m.joints);
      for (std::size_t k = 0; k < m.joints; ++k) row[k] = m.visibility.visible(t, k) ? 1 : 0;
      rows.push_back(row);
    }
    j["visibility"] = std::move(rows);
  }
  if (m.root_translation) {
    json rows = json::array();
    for (std::size_t t = 0; t < m.frames; ++t) {
      rows.push_back({(*m.root_translation)[t * 3], (*m.root_translation)[t * 3 + 1],
                      (*m.root_translation)[t * 3 + 2]});
    }
    j["root_translation"] = std::move(rows);
  }
  return j;
}

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("motion file lacks '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("motion file '") + key + "': " + e.what());
  }
}

}  // namespace

MotionFile motion_from_json(const json& j) {
  if (!j.is_object()) throw DataError("motion file must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"version", "topology", "frame_rate", "repr", "T", "J", "n",
                                  "values", "visibility", "root_translation"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; })) {
      throw DataError("motion file has unknown key '" + key + "'");
    }
  }
  const int version = field<int>(j, "version");
  if (version != kMotionFileVersion) {
    throw DataError("unsupported motion file version " + std::to_string(version));
  }
  MotionFile f;
  f.topology = field<std::string>(j, "topology");
  kin::Representation repr;
  try {
    repr = kin::parse_representation(field<std::string>(j, "repr"));
  } catch (const ParameterError& e) {
    throw DataError(e.what());
  }
  const auto T = field<std::size_t>(j, "T");
  const auto J = field<std::size_t>(j, "J");
  const auto n = field<std::size_t>(j, "n");
  if (n != kin::channels_of(repr)) {
    throw DataError("motion file declares n=" + std::to_string(n) + " for repr " +
                    std::string(kin::to_string(repr)));
  }
  auto m = kin::MotionTensor::zeros(T, J, repr, field<double>(j, "frame_rate"));
  if (!(m.frame_rate > 0.0)) throw DataError("motion file frame_rate must be positive");
  const auto rows = field<std::vector<std::vector<double>>>(j, "values");
  if (rows.size() != T) {
    throw DataError("motion file declares T=" + std::to_string(T) + " but has " +
                    std::to_string(rows.size()) + " frames");
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (rows[t].size() != J * n) {
      throw DataError("motion file frame " + std::to_string(t) + " has " +
                      std::to_string(rows[t].size()) + " values, expected J*n=" +
                      std::to_string(J * n));
    }
    std::copy(rows[t].begin(), rows[t].end(),
              m.values.begin() + static_cast<std::ptrdiff_t>(t * J * n));
  }
  if (j.contains("visibility")) {
    const auto vis = field<std::vector<std::vector<int>>>(j, "visibility");
    if (vis.size() != T) throw DataError("motion file visibility needs T rows");
    for (std::size_t t = 0; t < T; ++t) {
      if (vis[t].size() != J) throw DataError("motion file visibility rows need J flags");
      for (std::size_t k = 0; k < J; ++k) m.visibility.set(t, k, vis[t][k] != 0);
    }
  }
  if (j.contains("root_translation")) {
    const auto rt = field<std::vector<std::vector<double>>>(j, "root_translation");
    if (rt.size() != T) throw DataError("motion file root_translation needs T rows");
    std::vector<double> flat;
    flat.reserve(T * 3);
    for (const auto& r : rt) {
      if (r.size() != 3) throw DataError("motion file root_translation rows need 3 values");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    m.root_translation = std::move(flat);
  }
  f.motion = std::move(m);
  return f;
}

void write_motion_file(const fs::path& path, const MotionFile& file) {
  write_file_atomic(path, motion_to_json(file).dump() + "\n");
}

MotionFile read_motion_file(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    return motion_from_json(j);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<fs::path> list_motion_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace unimask::io
