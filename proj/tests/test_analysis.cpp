#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "reference_values.hpp"
#include "trapwalk/analysis.hpp"

using namespace trapwalk;

namespace {

SurvivalSeries make_series(ModelTag model, const std::vector<double>& times, auto&& f) {
  SurvivalSeries s;
  s.model = model;
  for (double t : times) s.samples.push_back({t, f(t)});
  return s;
}

std::vector<double> log_times(double lo, double hi, int count) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(lo * std::pow(hi / lo, double(k) / (count - 1)));
  return out;
}

std::vector<double> linear_times(double lo, double hi, int count) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(lo + (hi - lo) * k / (count - 1));
  return out;
}

const auto kMeshTrapsI = reference::traps(reference::kConfigs[0], reference::kMeshRates);

}  // namespace

TEST(PowerlawFit, RecoversExactPowerLaw) {
  const auto s = make_series(ModelTag::CrwContinuum, log_times(1.0, 1e4, 81), [](double t) { return 3.0 / std::sqrt(t); });
  const auto fit = fit_powerlaw_decay(s);
  EXPECT_NEAR(fit.exponent, -0.5, 1e-12);
  EXPECT_NEAR(fit.prefactor, 3.0, 1e-10);
  EXPECT_LT(fit.residual_rms, 1e-12);
  EXPECT_EQ(fit.samples_used, 21u);
  EXPECT_DOUBLE_EQ(fit.fit_window.t_lo, 1e3);
  EXPECT_DOUBLE_EQ(fit.fit_window.t_hi, 1e4);
}

TEST(PowerlawFit, ExponentialDecayIsAPoorFit) {
  const auto s = make_series(ModelTag::CrwContinuum, linear_times(1.0, 20.0, 40), [](double t) { return std::exp(-t); });
  const auto fit = fit_powerlaw_decay(s, {2.0, 20.0});
  EXPECT_GT(fit.residual_rms, 0.5);
}

TEST(PowerlawFit, ScaleEquivariance) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = -2.0 * unit(rng), b = 0.1 + 10.0 * unit(rng), scale = 0.01 + 100.0 * unit(rng);
    auto f = [&](double t) { return b * std::pow(t, a) * (1.0 + 0.05 * std::sin(t)); };
    const auto times = log_times(1.0, 1000.0, 60);
    const auto s1 = make_series(ModelTag::CrwContinuum, times, f);
    const auto s2 = make_series(ModelTag::CrwContinuum, times, [&](double t) { return scale * f(t); });
    const auto f1 = fit_powerlaw_decay(s1), f2 = fit_powerlaw_decay(s2);
    EXPECT_NEAR(f1.exponent, f2.exponent, 1e-10);
    EXPECT_NEAR(f2.prefactor / f1.prefactor, scale, 1e-9 * scale);
    EXPECT_NEAR(f1.residual_rms, f2.residual_rms, 1e-10);
  }
}

TEST(PowerlawFit, Errors) {
  const auto few = make_series(ModelTag::CrwContinuum, log_times(1.0, 100.0, 9), [](double t) { return 1.0 / t; });
  EXPECT_THROW(fit_powerlaw_decay(few, {1.0, 100.0}), InvalidSpec);
  const auto ok = make_series(ModelTag::CrwContinuum, log_times(1.0, 100.0, 30), [](double t) { return 1.0 / t; });
  EXPECT_THROW(fit_powerlaw_decay(ok, {10.0, 10.0}), InvalidSpec);
  EXPECT_THROW(fit_powerlaw_decay(ok, {0.0, 10.0}), InvalidSpec);
  auto zero = ok;
  zero.samples[20].survival = 0.0;
  EXPECT_THROW(fit_powerlaw_decay(zero, {1.0, 100.0}), InvalidSpec);
  EXPECT_THROW(fit_powerlaw_decay(SurvivalSeries{}), InvalidSpec);
}

TEST(PowerlawFit, SkipsUnderflowedSamples) {
  auto s = make_series(ModelTag::CrwContinuum, log_times(1.0, 100.0, 40), [](double t) { return 1.0 / t; });
  s.samples[35].survival = 1e-40;
  const auto fit = fit_powerlaw_decay(s, {1.0, 100.0});
  EXPECT_EQ(fit.samples_used, 39u);
  EXPECT_NEAR(fit.exponent, -1.0, 1e-12);
}

TEST(Plateau, ConstantSeries) {
  const auto s = make_series(ModelTag::QrwContinuum, linear_times(1.0, 100.0, 100), [](double) { return 0.37; });
  const auto p = estimate_plateau(s);
  EXPECT_DOUBLE_EQ(p.value, 0.37);
  EXPECT_EQ(p.spread, 0.0);
  EXPECT_TRUE(p.is_plateau());
}

TEST(Plateau, DiffusiveDecayIsNotAPlateau) {
  const auto s = make_series(ModelTag::CrwContinuum, linear_times(1.0, 100.0, 100), [](double t) { return 1.0 / std::sqrt(t); });
  const auto p = estimate_plateau(s);
  EXPECT_GT(p.spread / p.value, 0.02);
  EXPECT_FALSE(p.is_plateau());
}

TEST(Plateau, NeverAboveFirstSampleForDecreasingSeries) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    SurvivalSeries s;
    double p = 1.0;
    for (int k = 0; k < 50; ++k) {
      p *= 1.0 - 0.1 * unit(rng);
      s.samples.push_back({double(k + 1), p});
    }
    const auto est = estimate_plateau(s, 0.05 + 0.45 * unit(rng));
    EXPECT_LE(est.value, s.samples.front().survival);
    EXPECT_GE(est.value, s.samples.back().survival);
  }
}

TEST(Plateau, Errors) {
  const auto s = make_series(ModelTag::QrwContinuum, {1.0, 2.0}, [](double) { return 1.0; });
  EXPECT_THROW(estimate_plateau(s, 0.0), InvalidSpec);
  EXPECT_THROW(estimate_plateau(s, 0.6), InvalidSpec);
  EXPECT_THROW(estimate_plateau(SurvivalSeries{}, 0.1), InvalidSpec);
}

TEST(LightCone, SyntheticFront) {
  std::vector<Snapshot> snaps;
  for (int k = 1; k <= 5; ++k) {
    Snapshot s{double(k), std::vector<double>(41, 0.0)};
    s.occupancy[20 + 3 * k] = 1e-3;
    s.occupancy[20 - k] = 1e-3;
    snaps.push_back(s);
  }
  EXPECT_NEAR(light_cone_speed(snaps), 3.0, 1e-12);
  EXPECT_THROW(light_cone_speed(std::span(snaps).first(1)), InvalidSpec);
  snaps[2].occupancy.assign(41, 0.0);
  EXPECT_THROW(light_cone_speed(snaps), InvalidSpec);
}

TEST(LightCone, QrwSpreadsAtTwiceTheHopping) {
  const double j = 0.7, t_end = 80.0;
  const LatticeSpec spec = make_grid({j, {}, 0, 0}, t_end, ModelTag::QrwContinuum);
  const auto times = linear_times(20.0, t_end, 13);
  const auto run = run_qrw(spec, t_end, times, {.record_snapshots = true});
  ASSERT_EQ(run.snapshots.size(), times.size());
  EXPECT_NEAR(light_cone_speed(run.snapshots) / (2.0 * j), 1.0, 0.05);
}

TEST(LightCone, CrwFrontSlowsDown) {
  const LatticeSpec spec = make_grid({1.0, {}, 0, 0}, 1600.0, ModelTag::CrwContinuum);
  const auto early_times = linear_times(50.0, 200.0, 16);
  const auto late_times = linear_times(800.0, 1600.0, 16);
  std::vector<double> all = early_times;
  all.insert(all.end(), late_times.begin(), late_times.end());
  const auto run = run_crw(spec, 1600.0, all, {.record_snapshots = true});
  const std::span snaps(run.snapshots);
  const double early = light_cone_speed(snaps.first(16));
  const double late = light_cone_speed(snaps.subspan(16, 16));
  EXPECT_GT(early, 0.0);
  EXPECT_LT(late, 0.75 * early);
}

TEST(LightCone, CoherentMeshMovesAtCosBeta) {
  MeshSpec spec;
  spec.beta = 0.8 * std::numbers::pi / 2;
  spec.steps = 600;
  spec = make_mesh_grid(spec, ModelTag::MeshCoherent);
  MeshRunOptions options;
  options.record_snapshots = true;
  options.snapshot_stride = 50;
  const auto run = run_mesh(spec, options);
  const std::span snaps(run.snapshots);
  EXPECT_NEAR(light_cone_speed(snaps.subspan(1)) / std::cos(spec.beta), 1.0, 0.1);
}

TEST(Convergence, LosslessScanIsExact) {
  const std::vector<double> betas{0.8 * std::numbers::pi / 2};
  const auto rows = continuum_convergence_scan({}, betas, 200);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_LT(rows[0].qrw_discrepancy, 1e-8);
  EXPECT_LT(rows[0].crw_discrepancy, 1e-10);
}

TEST(Convergence, DiscrepancyShrinksTowardsFullCoupling) {
  const std::vector<double> betas{0.8 * std::numbers::pi / 2, 0.9 * std::numbers::pi / 2,
                                  0.95 * std::numbers::pi / 2};
  const auto rows = continuum_convergence_scan(kMeshTrapsI, betas, 500);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_LT(rows[k].qrw_discrepancy, rows[k - 1].qrw_discrepancy);
    EXPECT_LT(rows[k].crw_discrepancy, rows[k - 1].crw_discrepancy);
  }
}

TEST(Convergence, WeakerTrapsDoNotWorsenAgreement) {
  std::map<int, double> half = kMeshTrapsI;
  for (auto& [site, rate] : half) rate *= 0.5;
  const std::vector<double> betas{0.9 * std::numbers::pi / 2};
  const auto full_row = continuum_convergence_scan(kMeshTrapsI, betas, 500)[0];
  const auto half_row = continuum_convergence_scan(half, betas, 500)[0];
  EXPECT_LE(half_row.qrw_discrepancy, full_row.qrw_discrepancy);
  EXPECT_LE(half_row.crw_discrepancy, full_row.crw_discrepancy);
}

TEST(Convergence, Errors) {
  const std::vector<double> bad{std::numbers::pi / 2};
  EXPECT_THROW(continuum_convergence_scan({}, bad, 10), InvalidSpec);
  const std::vector<double> ok{1.0};
  EXPECT_THROW(continuum_convergence_scan({}, ok, 0), InvalidSpec);
}
