#include "unimask/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "unimask/error.hpp"
#include "unimask/io/files.hpp"

namespace unimask::model {

namespace {

constexpr char kMagic[8] = {'U', 'N', 'I', 'M', 'A', 'S', 'K', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_array(std::string& out, const std::string& name, const nk::Shape& shape,
               std::span<const double> values) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put_u64(out, d);
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  const char* take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw DataError("checkpoint is truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint64_t u(int width) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct Array {
  nk::Shape shape;
  std::vector<double> values;
};

}  // namespace

std::string serialize_checkpoint(const UnimaskModel& model, const nlohmann::json& extra) {
  const nlohmann::json meta = {{"model", to_json(model.config())},
                               {"topology", to_json(model.topology())},
                               {"extra", extra}};
  const std::string text = meta.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out += text;
  put_u64(out, model.parameters().size() + 2);
  for (const auto& p : model.parameters()) {
    put_array(out, p.name, p.tensor.shape(), p.tensor.values());
  }
  const nk::Shape f{model.feature_dim()};
  put_array(out, "buffer.norm_mean", f, model.norm_mean());
  put_array(out, "buffer.norm_std", f, model.norm_std());
  return out;
}

UnimaskModel deserialize_checkpoint(const std::string& bytes, nlohmann::json* extra) {
  Reader r(bytes);
  if (std::memcmp(r.take(8), kMagic, 8) != 0) throw DataError("not a checkpoint file");
  const auto version = r.u(4);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto meta_len = r.u(8);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(std::string(r.take(meta_len), meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
  std::map<std::string, Array> arrays;
  const auto count = r.u(8);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.u(4);
    std::string name(r.take(name_len), name_len);
    Array a;
    const auto rank = r.u(4);
    for (std::uint64_t k = 0; k < rank; ++k) a.shape.push_back(r.u(8));
    const std::size_t n = nk::numel(a.shape);
    if (n > bytes.size() / 8) throw DataError("checkpoint is truncated");
    a.values.resize(n);
    for (auto& v : a.values) v = std::bit_cast<double>(r.u(8));
    arrays.emplace(std::move(name), std::move(a));
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint payload");

  if (!meta.is_object() || !meta.contains("model") || !meta.contains("topology")) {
    throw DataError("checkpoint metadata lacks model or topology");
  }
  UnimaskModel model = [&] {
    try {
      return UnimaskModel(model_config_from_json(meta.at("model")),
                          topology_from_json(meta.at("topology")));
    } catch (const ConfigError& e) {
      throw DataError(std::string("checkpoint metadata: ") + e.what());
    }
  }();
  for (auto& p : model.parameters()) {
    auto it = arrays.find(p.name);
    if (it == arrays.end()) throw DataError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second.shape != p.tensor.shape()) {
      throw DataError("checkpoint parameter '" + p.name + "' has shape " +
                      nk::shape_str(it->second.shape) + ", model expects " +
                      nk::shape_str(p.tensor.shape()));
    }
    std::copy(it->second.values.begin(), it->second.values.end(),
              p.tensor.mutable_values().begin());
    arrays.erase(it);
  }
  auto mean = arrays.find("buffer.norm_mean");
  auto stddev = arrays.find("buffer.norm_std");
  if (mean == arrays.end() || stddev == arrays.end()) {
    throw DataError("checkpoint lacks normalizer buffers");
  }
  model.set_normalizer(mean->second.values, stddev->second.values);
  arrays.erase("buffer.norm_mean");
  arrays.erase("buffer.norm_std");
  if (!arrays.empty()) {
    throw DataError("checkpoint has unknown array '" + arrays.begin()->first + "'");
  }
  if (extra) *extra = meta.value("extra", nlohmann::json::object());
  return model;
}

void save_checkpoint(const UnimaskModel& model, const std::filesystem::path& path,
                     const nlohmann::json& extra) {
  io::write_file_atomic(path, serialize_checkpoint(model, extra));
}

UnimaskModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra) {
  return deserialize_checkpoint(io::read_file(path), extra);
}

}  // namespace unimask::model
