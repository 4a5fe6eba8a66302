#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <utility>

namespace cbebf {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives an independent child seed from a parent seed and a sequence of
/// stream labels, e.g. derive_seed(master, trial) or derive_seed(s, 3, i).
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t h = mix64(parent);
  for (std::uint64_t label : labels) h = mix64(h ^ mix64(label + 0x632BE59BD9B4E019ULL));
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) noexcept {
  return derive_seed(parent, {label});
}

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// A pure function of (counter, key); no internal state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Maps 64 random bits to a double in (0, 1].
constexpr double bits_to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Two independent standard normals for the stream position (key, a, b, c).
/// Box-Muller over one Philox block.
inline std::pair<double, double> normal_pair(std::uint64_t key, std::uint32_t a, std::uint32_t b,
                                             std::uint32_t c) noexcept {
  const auto out = Philox4x32::generate(
      {a, b, c, 0u}, {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
  const double u1 = bits_to_unit_open((std::uint64_t{out[0]} << 32) | out[1]);
  const double u2 = bits_to_unit_open((std::uint64_t{out[2]} << 32) | out[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace cbebf
