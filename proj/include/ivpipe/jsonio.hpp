#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ivpipe/errors.hpp"

namespace ivpipe {

// All emitted documents use ordered_json so field order is ours, not
// alphabetical, and output bytes are reproducible.
using Json = nlohmann::ordered_json;

namespace jsonio {

inline Json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

inline void save_file(const std::string& path, const Json& doc) {
  if (auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("short write to " + path);
}

inline const Json& require(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw SchemaError(where + ": missing required field \"" + key + "\"");
  return obj.at(key);
}

inline std::string require_string(const Json& obj, const std::string& key,
                                  const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_string()) throw SchemaError(where + ": field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

inline std::int64_t require_int(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_number_integer())
    throw SchemaError(where + ": field \"" + key + "\" must be an integer");
  return v.get<std::int64_t>();
}

}  // namespace jsonio
}  // namespace ivpipe
