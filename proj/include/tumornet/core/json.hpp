#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumornet/core/error.hpp"

namespace tumornet {

// Config objects are strict: any key outside `keys` is a config error.
inline void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::config, where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      throw Error(ErrorCode::config, "unknown key '" + it.key() + "' in " + where);
    }
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  reject_unknown(j, std::vector<std::string>(keys.begin(), keys.end()), where);
}

// Reads j[key] into v when present; type errors become config errors.
template <typename V>
void read_optional(const nlohmann::json& j, const std::string& key, V& v, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(v);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config, where + "." + key + ": " + e.what());
  }
}

}  // namespace tumornet
