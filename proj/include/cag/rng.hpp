#pragma once

// Portable random helpers.
//
// std::mt19937_64 has a fully specified output sequence, but the standard
// distributions do not. Everything that must be reproducible across platforms
// goes through the helpers below instead of <random> distributions.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>

namespace cag {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the replicate/stream `index` derived from `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return splitmix64(base ^ splitmix64(index + 1));
}

/// Uniform real in [0,1): the top 53 bits of one engine draw.
template <class Eng>
double uniform_unit(Eng& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, n) by rejection. n must be positive.
template <class Eng>
std::size_t uniform_index(Eng& eng, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = eng();
  while (draw >= limit) draw = eng();
  return static_cast<std::size_t>(draw % range);
}

/// Fisher-Yates shuffle on top of uniform_index.
template <class Container, class Eng>
void shuffle(Container& items, Eng& eng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(eng, i);
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace cag
