// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace abo {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a, stable across platforms.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Engine = std::mt19937_64;

/// One seeded root; every consumer derives its own stream from a stable label
/// (and optionally a round/counter), so adding a consumer never shifts others.
/// A stream is fully determined by (root seed, label, key), which is what makes
/// round-boundary checkpoints sufficient to restore randomness.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t root_seed = 0) : root_(root_seed) {}

  std::uint64_t root_seed() const noexcept { return root_; }

  Engine stream(std::string_view label, std::uint64_t key = 0) const {
    std::uint64_t s = mix64(root_ ^ mix64(fnv1a(label)) ^ mix64(key + 0x51ed27ULL));
    return Engine(s);
  }

 private:
  std::uint64_t root_;
};

/// Unbiased integer in [0, n); n > 0. Implemented here rather than with
/// std::uniform_int_distribution so streams replay identically across
/// standard libraries.
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
  const std::uint64_t threshold = (std::uint64_t{0} - n) % n;  // 2^64 mod n
  std::uint64_t x;
  do {
    x = eng();
  } while (x < threshold);
  return x % n;
}

/// Uniform real in [0, 1) with 53 bits.
inline double uniform_unit(Engine& eng) {
  return static_cast<double>(eng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace abo
