#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "trapwalk/rng.hpp"

using namespace trapwalk;

// Known-answer vectors from the Random123 distribution (kat_vectors).
TEST(Philox, KnownAnswerZero) {
  const auto out = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (Philox4x32Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (Philox4x32Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto out = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (Philox4x32Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Splitmix, ReferenceSequence) {
  // First outputs of the reference generator seeded with 0.
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafull);
  EXPECT_EQ(splitmix64(0x9E3779B97F4A7C15ull), 0x6e789e6aa1b965f4ull);
}

TEST(StreamSeeds, DistinctAcrossIndicesAndMasters) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t master : {0ull, 1ull, 12345ull}) {
    for (std::uint64_t r = 0; r < 2000; ++r) seen.insert(derive_stream_seed(master, r));
  }
  EXPECT_EQ(seen.size(), 6000u);
  EXPECT_EQ(derive_stream_seed(7, 3), derive_stream_seed(7, 3));
}

TEST(PhaseField, FillMatchesPointwise) {
  const PhaseField field(42);
  for (std::size_t n : {1u, 2u, 7u, 64u}) {
    std::vector<double> phases(n);
    field.fill(5, phases);
    for (std::size_t k = 0; k < n; ++k) EXPECT_EQ(phases[k], field.phase(5, k));
  }
}

TEST(PhaseField, DependsOnlyOnSeedStepAndSite) {
  std::vector<double> a(33), b(33), c(33);
  PhaseField(9).fill(100, a);
  PhaseField(9).fill(100, b);
  PhaseField(10).fill(100, c);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  // A longer row agrees on its prefix.
  std::vector<double> longer(50);
  PhaseField(9).fill(100, longer);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], longer[k]);
}

TEST(PhaseField, UniformMoments) {
  const PhaseField field(2718);
  const std::size_t n = 200000;
  std::vector<double> row(1000);
  double sum = 0.0, sq = 0.0, cos_sum = 0.0;
  double lo = 10.0, hi = -10.0;
  for (std::uint64_t step = 0; step < n / row.size(); ++step) {
    field.fill(step, row);
    for (double p : row) {
      sum += p;
      sq += p * p;
      cos_sum += std::cos(p);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  const double pi = std::numbers::pi;
  EXPECT_GT(lo, -pi);
  EXPECT_LT(hi, pi);
  // Standard errors: pi/sqrt(3n) for the mean, ~1/sqrt(2n) for <cos>.
  EXPECT_NEAR(sum / n, 0.0, 5.0 * pi / std::sqrt(3.0 * n));
  EXPECT_NEAR(sq / n, pi * pi / 3.0, 0.02);
  EXPECT_NEAR(cos_sum / n, 0.0, 5.0 / std::sqrt(2.0 * n));
}

TEST(PhaseField, HistogramIsFlat) {
  const PhaseField field(1);
  constexpr int kBins = 16;
  std::vector<int> counts(kBins, 0);
  std::vector<double> row(4096);
  for (std::uint64_t step = 0; step < 40; ++step) {
    field.fill(step, row);
    for (double p : row) {
      const int bin = static_cast<int>((p + std::numbers::pi) / (2.0 * std::numbers::pi) * kBins);
      ++counts[static_cast<std::size_t>(std::clamp(bin, 0, kBins - 1))];
    }
  }
  const double expected = 40.0 * 4096 / kBins;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 15 degrees of freedom; 99.9th percentile is about 37.7.
  EXPECT_LT(chi2, 37.7);
}
