#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "unimask/model/unimask_model.hpp"

// Checkpoint container, little-endian throughout:
//
//   magic      8 bytes  "UNIMASKC"
//   version    u32      1
//   meta_len   u64      length of the JSON document that follows
//   meta       bytes    {"model": ModelConfig, "topology": ..., "extra": ...}
//   count      u64      number of arrays
//   per array: name_len u32, name bytes, rank u32, dims u64[rank],
//              values f64[prod(dims)] row-major (IEEE-754 bit patterns)
//
// Arrays are the trainable parameters in creation order followed by
// "buffer.norm_mean" and "buffer.norm_std".
namespace unimask::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const UnimaskModel& model,
                                 const nlohmann::json& extra = nlohmann::json::object());
UnimaskModel deserialize_checkpoint(const std::string& bytes,
                                    nlohmann::json* extra = nullptr);

// Atomic write.
void save_checkpoint(const UnimaskModel& model, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());
// Throws DataError for missing, truncated or foreign files.
UnimaskModel load_checkpoint(const std::filesystem::path& path,
                             nlohmann::json* extra = nullptr);

}  // namespace unimask::model
