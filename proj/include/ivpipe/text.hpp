#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

namespace ivpipe::text {

// Canonical form used by every similarity computation: lowercase, punctuation
// stripped, runs of whitespace collapsed to single spaces, ends trimmed.
inline std::string normalize(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      pending_space = true;
    }
    // every other byte is punctuation and dropped
  }
  return out;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Normalized word sequence, the unit both word alignment and word error
// rate operate on.
inline std::vector<std::string> tokenize(const std::string& raw) {
  return split_ws(normalize(raw));
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Slot names coming back from a language model are free-form; fold them to
// snake_case so "Trauma Details" and "trauma_details" collide.
inline std::string snake_case(const std::string& raw) {
  std::string out;
  bool pending_sep = false;
  for (unsigned char c : raw) {
    if (std::isalnum(c)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

// 64-bit FNV-1a. Deliberately not std::hash: the bucket a token lands in must
// be stable across platforms and standard libraries.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace ivpipe::text
