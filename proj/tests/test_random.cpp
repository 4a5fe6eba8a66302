#include "cbebf/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace {

using cbebf::Philox4x32;

// Known-answer vectors published with Random123.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                        {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                        {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(DeriveSeed, DistinctLabelsGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t parent = 0; parent < 20; ++parent) {
    for (std::uint64_t label = 0; label < 50; ++label) seen.insert(cbebf::derive_seed(parent, label));
  }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(cbebf::derive_seed(1, {2, 3}), cbebf::derive_seed(1, {3, 2}));
}

TEST(NormalPair, MomentsAreStandard) {
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n / 2; ++i) {
    const auto [a, b] = cbebf::normal_pair(77, static_cast<std::uint32_t>(i), 5, 0);
    sum += a + b;
    sq += a * a + b * b;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(UnitOpen, NeverZero) {
  EXPECT_GT(cbebf::bits_to_unit_open(0), 0.0);
  EXPECT_EQ(cbebf::bits_to_unit_open(~0ULL), 1.0);
}

}  // namespace
