#pragma once

#include <array>
#include <cstdint>

namespace mfteam {

/// One SplitMix64 output step applied to `x` (stateless finalizer form).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

/**
 * Counter-based, splittable random stream.
 *
 * A stream is nothing but a 64-bit key. Children are derived with split(),
 * and draws are pure functions of (key, counter), so the value returned for a
 * given coordinate never depends on evaluation order or thread count.
 */
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : key_(splitmix64(seed)) {}

  /// Child stream identified by `tag`; distinct tags give independent keys.
  [[nodiscard]] constexpr CounterRng split(std::uint64_t tag) const {
    CounterRng child(0);
    child.key_ = splitmix64(key_ ^ splitmix64(tag + 0x632be59bd9b4e019ull));
    return child;
  }

  /// Four raw 32-bit words for the counter (a, b).
  [[nodiscard]] PhiloxCounter bits(std::uint64_t a, std::uint64_t b) const;

  /// Uniform double in [0, 1) with 53 random bits, addressed by (a, b).
  [[nodiscard]] double uniform(std::uint64_t a, std::uint64_t b = 0) const;

  [[nodiscard]] constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace mfteam
