#pragma once

// Continuous-time classical random walk with traps:
//   dp_n/dt = J (p_{n+1} + p_{n-1}) - 2 J p_n - gamma_n p_n

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "trapwalk/expm.hpp"
#include "trapwalk/integrator.hpp"
#include "trapwalk/lattice.hpp"

namespace trapwalk {

struct CrwGenerator {
  Tridiagonal<double> matrix;
  int half_width = 0;
};

/// Zero-flux walls: boundary rows drop both the out-of-grid inflow and the
/// matching outflow, so every column sums to -gamma_n.
inline CrwGenerator build_crw_generator(const LatticeSpec& spec) {
  validate(spec);
  const std::size_t n = spec.size();
  const double j = spec.hopping;
  const auto gamma = spec.rate_profile();
  CrwGenerator g{Tridiagonal<double>(n), spec.half_width};
  for (std::size_t i = 0; i < n; ++i) {
    double out_rate = 0.0;
    if (i > 0) {
      g.matrix.lower[i] = j;
      out_rate += j;
    }
    if (i + 1 < n) {
      g.matrix.upper[i] = j;
      out_rate += j;
    }
    g.matrix.diag[i] = -out_rate - gamma[i];
  }
  return g;
}

inline double crw_time_step(const LatticeSpec& spec) {
  return 0.1 / (4.0 * spec.hopping + spec.max_rate());
}

// Negative entries smaller than this in magnitude are RK4 roundoff.
inline constexpr double kNegativeClamp = 1e-14;
inline constexpr double kMonotoneTolerance = 1e-12;

inline Trajectory<ClassicalState> run_crw(const LatticeSpec& spec, double t_end,
                                          std::span<const double> sample_times,
                                          const RunOptions& options = {}) {
  check_sample_times(sample_times, t_end);
  const CrwGenerator gen = build_crw_generator(spec);
  const double dt = options.dt.value_or(crw_time_step(spec));
  check_time_step(dt, t_end);

  std::vector<double> schedule(sample_times.begin(), sample_times.end());
  if (schedule.empty() || schedule.back() < t_end) schedule.push_back(t_end);
  const std::size_t recorded = sample_times.size();

  Trajectory<ClassicalState> out;
  out.series.model = ModelTag::CrwContinuum;
  out.series.params.lattice = spec;
  ClassicalState state = localized_classical(spec);
  double previous = survival(state);

  std::size_t index = 0;
  integrate_to_samples(gen.matrix, state.probs, schedule, dt, [&](double t, std::vector<double>& p) {
    for (double& x : p) {
      if (x < 0.0) {
        if (x <= -kNegativeClamp) {
          throw NumericalError("negative probability " + std::to_string(x) + " at t = " + std::to_string(t));
        }
        x = 0.0;
      }
    }
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (total > previous + kMonotoneTolerance) {
      throw NumericalError("classical survival increased at t = " + std::to_string(t));
    }
    previous = total;
    if (options.enforce_edge_guard) {
      enforce_edge_guard(p.size(), [&](std::size_t k) { return p[k]; }, total, t);
    }
    if (index < recorded) {
      out.series.samples.push_back({t, std::clamp(total, 0.0, 1.0)});
      if (options.record_snapshots) out.snapshots.push_back({t, p});
    }
    ++index;
  });
  state.time = t_end;
  out.final_state = std::move(state);
  return out;
}

/// p(t) = exp(M t) delta_{n0} by dense matrix exponential.
inline ClassicalState expm_oracle_crw(const LatticeSpec& spec, double t) {
  const CrwGenerator gen = build_crw_generator(spec);
  if (spec.size() > kMaxDenseOracleSites) {
    throw InvalidSpec("grid too large for dense oracle: " + std::to_string(spec.size()) + " sites");
  }
  return {expm_column(gen.matrix, t, spec.offset(spec.initial_site)), t};
}

}  // namespace trapwalk
