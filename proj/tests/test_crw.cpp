#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "trapwalk/crw.hpp"

using namespace trapwalk;

namespace {

const std::map<int, double> kTrapsIII{{1, 1.0}, {2, 0.4}, {4, 1.5}, {7, 0.6}};

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(CrwGenerator, ThreeSitesNoTraps) {
  const auto g = build_crw_generator({1.0, {}, 0, 1});
  // Zero-flux walls: the boundary rows lose one hopping channel.
  EXPECT_EQ(g.matrix.diag, (std::vector<double>{-1.0, -2.0, -1.0}));
  EXPECT_EQ(g.matrix.at(0, 1), 1.0);
  EXPECT_EQ(g.matrix.at(1, 0), 1.0);
  EXPECT_EQ(g.matrix.at(1, 2), 1.0);
  EXPECT_EQ(g.matrix.at(2, 1), 1.0);
  EXPECT_EQ(g.matrix.at(0, 2), 0.0);
}

TEST(CrwGenerator, TrapOnCentreDiagonal) {
  const auto g = build_crw_generator({1.0, {{0, 1.0}}, 0, 1});
  EXPECT_EQ(g.matrix.diag[1], -3.0);
}

TEST(CrwGenerator, ColumnSumsLeakOnlyAtTraps) {
  const double gamma = 0.7;
  const auto g = build_crw_generator({0.5, {{0, gamma}}, 0, 2});
  std::vector<double> sums(5, 0.0);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 5; ++c) sums[c] += g.matrix.at(r, c);
  }
  const std::vector<double> expected{0.0, 0.0, -gamma, 0.0, 0.0};
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(sums[c], expected[c], 1e-15);
}

TEST(CrwGenerator, RandomSpecsKeepMetzlerStructure) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rate(0.0, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    LatticeSpec spec{0.1 + rate(rng), {}, 0, 1 + trial % 9};
    for (int k = 0; k < 3; ++k) {
      spec.traps[static_cast<int>(rng() % (2 * spec.half_width + 1)) - spec.half_width] = rate(rng);
    }
    const auto g = build_crw_generator(spec);
    const auto gamma = spec.rate_profile();
    for (std::size_t c = 0; c < spec.size(); ++c) {
      double sum = 0.0;
      for (std::size_t r = 0; r < spec.size(); ++r) {
        sum += g.matrix.at(r, c);
        if (r != c) {
          EXPECT_GE(g.matrix.at(r, c), 0.0);
        }
      }
      EXPECT_NEAR(sum, -gamma[c], 1e-14);
    }
  }
}

TEST(RunCrw, ConservesProbabilityWithoutTraps) {
  const LatticeSpec spec = make_grid({1.0, {}, 0, 0}, 100.0, ModelTag::CrwContinuum);
  const std::vector<double> times{1.0, 10.0, 50.0, 100.0};
  const auto run = run_crw(spec, 100.0, times);
  ASSERT_EQ(run.series.samples.size(), times.size());
  for (const auto& s : run.series.samples) EXPECT_NEAR(s.survival, 1.0, 1e-10);
}

TEST(RunCrw, DiffusiveGaussianAtCentre) {
  const double t = 25.0;
  const LatticeSpec spec = make_grid({1.0, {}, 0, 0}, t, ModelTag::CrwContinuum);
  const std::vector<double> times{t};
  const auto run = run_crw(spec, t, times, {.record_snapshots = true});
  const double centre = run.snapshots.back().occupancy[spec.offset(0)];
  const double gaussian = 1.0 / std::sqrt(4.0 * std::numbers::pi * t);
  EXPECT_NEAR(centre / gaussian, 1.0, 0.02);
}

TEST(RunCrw, TrapSetIIIMatchesDenseOracleAtJt1000) {
  const double t = 1000.0;
  const LatticeSpec spec = make_grid({1.0, kTrapsIII, 0, 0}, t, ModelTag::CrwContinuum);
  ASSERT_LE(spec.size(), kMaxDenseOracleSites);
  const std::vector<double> times{t};
  const auto run = run_crw(spec, t, times);
  const double oracle = survival(expm_oracle_crw(spec, t));
  EXPECT_NEAR(run.series.samples.back().survival, oracle, 1e-6);
  EXPECT_NEAR(max_abs_diff(run.final_state.probs, expm_oracle_crw(spec, t).probs), 0.0, 1e-6);
}

TEST(RunCrw, SurvivalNeverIncreases) {
  const LatticeSpec spec = make_grid({1.0, kTrapsIII, 0, 0}, 200.0, ModelTag::CrwContinuum);
  std::vector<double> times;
  for (int k = 1; k <= 400; ++k) times.push_back(0.5 * k);
  const auto run = run_crw(spec, 200.0, times);
  EXPECT_TRUE(satisfies_invariants(run.series));
  for (std::size_t k = 1; k < run.series.samples.size(); ++k) {
    EXPECT_LE(run.series.samples[k].survival, run.series.samples[k - 1].survival + 1e-12);
  }
}

TEST(RunCrw, Errors) {
  const LatticeSpec spec{1.0, {}, 0, 10};
  const std::vector<double> unsorted{2.0, 1.0};
  EXPECT_THROW(run_crw(spec, 3.0, unsorted), InvalidSpec);
  const std::vector<double> beyond{4.0};
  EXPECT_THROW(run_crw(spec, 3.0, beyond), InvalidSpec);
  const std::vector<double> long_run{50.0};
  EXPECT_THROW(run_crw(spec, 50.0, long_run), TruncationError);
  const std::vector<double> one{1.0};
  EXPECT_THROW(run_crw(spec, 1.0, one, {.dt = 1e-300}), NumericalError);
}

TEST(ExpmOracleCrw, IdentityAtTimeZero) {
  const LatticeSpec spec{1.0, {{1, 0.5}}, 2, 5};
  const auto p = expm_oracle_crw(spec, 0.0).probs;
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_EQ(p[k], k == spec.offset(2) ? 1.0 : 0.0);
}

TEST(ExpmOracleCrw, SingleSiteDecay) {
  const double gamma = 0.8;
  const auto s = expm_oracle_crw({1.0, {{0, gamma}}, 0, 0}, 1.0);
  EXPECT_NEAR(survival(s), std::exp(-gamma), 1e-14);
}

TEST(ExpmOracleCrw, AgreesWithRichardsonExtrapolatedRk4) {
  const LatticeSpec spec{1.0, {{0, 1.0}}, 0, 10};
  const double t = 2.0;
  const auto gen = build_crw_generator(spec);
  const double h = crw_time_step(spec);
  auto coarse = localized_classical(spec).probs;
  auto fine = coarse;
  Rk4Stepper<double>(gen.matrix).advance(coarse, t, h);
  Rk4Stepper<double>(gen.matrix).advance(fine, t, h / 2);
  std::vector<double> extrapolated(coarse.size());
  for (std::size_t k = 0; k < coarse.size(); ++k) extrapolated[k] = (16.0 * fine[k] - coarse[k]) / 15.0;
  EXPECT_LT(max_abs_diff(extrapolated, expm_oracle_crw(spec, t).probs), 1e-8);
}

TEST(ExpmOracleCrw, RejectsLargeGrids) {
  EXPECT_THROW(expm_oracle_crw({1.0, {}, 0, 512}, 1.0), InvalidSpec);
}

TEST(RunCrw, MatchesOracleOnRandomTrapSets) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double j = 0.2 + 1.8 * unit(rng);
    const double t = (0.5 + 9.5 * unit(rng)) / j;
    LatticeSpec spec{j, {}, static_cast<int>(rng() % 7) - 3, 0};
    const int traps = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < traps; ++k) spec.traps[static_cast<int>(rng() % 21) - 10] = 2.0 * unit(rng);
    spec = make_grid(spec, t, ModelTag::CrwContinuum);
    ASSERT_LE(spec.size(), 201u);
    const std::vector<double> times{t};
    const auto run = run_crw(spec, t, times);
    EXPECT_LT(max_abs_diff(run.final_state.probs, expm_oracle_crw(spec, t).probs), 1e-6) << "trial " << trial;
  }
}
