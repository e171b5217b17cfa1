#pragma once

// Counter-based seeding. Every random draw in the library comes from a
// std::mt19937_64 seeded by hashing (master seed, stream, counters...), so
// independent consumers never share state and results do not depend on the
// order in which rows or runs are processed.

#include <cstdint>
#include <initializer_list>

namespace c3 {

enum class StreamId : std::uint64_t {
  kParams = 1,
  kShuffle = 2,
  kAugment = 3,
  kData = 4,
  kCenters = 5,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamId stream,
                                    std::initializer_list<std::uint64_t> counters = {}) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
  for (std::uint64_t c : counters) h = splitmix64(h ^ splitmix64(c + 0x632BE59BD9B4E019ULL));
  return h;
}

}  // namespace c3
