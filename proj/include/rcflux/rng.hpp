#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace rcflux {

using Engine = std::mt19937_64;

/// Engine whose state depends only on (seed, coordinates). Streams for
/// different coordinates are unrelated, so any task can be reproduced
/// without replaying the others.
inline Engine derive_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * coords.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t c : coords) {
    words.push_back(static_cast<std::uint32_t>(c));
    words.push_back(static_cast<std::uint32_t>(c >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

/// 64-bit child seed for (seed, coordinates).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
  Engine e = derive_engine(seed, coords);
  return e();
}

}  // namespace rcflux
