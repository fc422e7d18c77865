#pragma once

#include <iostream>
#include <mutex>
#include <string>

#include "ivpipe/jsonio.hpp"

namespace ivpipe::log {

// One JSON object per line on stderr. Deliberately timestamp-free so two
// identical runs emit identical diagnostics.
inline void emit(const std::string& level, const std::string& event, Json fields = Json::object()) {
  static std::mutex mu;
  Json line;
  line["level"] = level;
  line["event"] = event;
  for (auto it = fields.begin(); it != fields.end(); ++it) line[it.key()] = it.value();
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << line.dump() << '\n';
}

inline void info(const std::string& event, Json fields = Json::object()) {
  emit("info", event, std::move(fields));
}

inline void warn(const std::string& event, Json fields = Json::object()) {
  emit("warn", event, std::move(fields));
}

inline void error(const std::string& event, Json fields = Json::object()) {
  emit("error", event, std::move(fields));
}

}  // namespace ivpipe::log
