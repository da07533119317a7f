#pragma once

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "unimask/error.hpp"

namespace unimask::io {

// Throws ConfigError naming the first key of `j` outside `known`.
inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                                const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok |= key == k;
    if (!ok) throw ConfigError("unknown " + what + " key '" + key + "'");
  }
}

// Leaves `into` untouched when the key is absent.
template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& into, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + " '" + key + "': " + e.what());
  }
}

}  // namespace unimask::io
