#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ivpipe/text.hpp"

namespace ivpipe::rng {

// Thin wrapper over mt19937_64. The standard pins that engine's output
// sequence, and we derive doubles and ranges from raw bits ourselves, so
// streams are identical across platforms (the std distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}

  std::uint64_t bits() { return g_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive. Modulo bias is irrelevant at
  // fixture scale.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(bits() % span);
  }

  std::size_t index(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(bits() % n); }

  bool chance(double p) { return uniform() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& pool) {
    return pool[index(pool.size())];
  }

 private:
  std::mt19937_64 g_;
};

// Independent substream: hash the parent seed with a label. Lets one corpus
// seed drive per-question decisions that stay fixed while other knobs move.
inline Rng substream(std::uint64_t seed, const std::string& label) {
  return Rng(text::fnv1a(label) ^ (seed * 0x9e3779b97f4a7c15ull));
}

}  // namespace ivpipe::rng
