#pragma once

// Post-processing of survival series: power-law fits, plateau estimates,
// continuum-limit convergence scans and light-cone speeds.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "trapwalk/crw.hpp"
#include "trapwalk/lattice.hpp"
#include "trapwalk/mesh.hpp"
#include "trapwalk/qrw.hpp"

namespace trapwalk {

struct FitWindow {
  double t_lo = 0.0;
  double t_hi = 0.0;

  bool operator==(const FitWindow&) const = default;
};

struct DecayFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  FitWindow fit_window;
  double residual_rms = 0.0;  // in log-log space
  std::size_t samples_used = 0;
};

inline constexpr std::size_t kMinFitSamples = 10;
inline constexpr double kLogFloor = 1e-30;

/// The last decade of the series' time axis.
inline FitWindow last_decade(const SurvivalSeries& series) {
  if (series.samples.empty()) throw InvalidSpec("empty survival series");
  const double t_hi = series.samples.back().time;
  return {t_hi / 10.0, t_hi};
}

/// Ordinary least squares of log P against log t inside `window`.
/// Samples below kLogFloor are skipped.
inline DecayFit fit_powerlaw_decay(const SurvivalSeries& series, FitWindow window) {
  if (!(window.t_lo < window.t_hi) || !(window.t_lo > 0.0)) {
    throw InvalidSpec("fit window must satisfy 0 < t_lo < t_hi");
  }
  std::vector<double> xs, ys;
  for (const auto& s : series.samples) {
    if (s.time < window.t_lo || s.time > window.t_hi) continue;
    if (!(s.survival > 0.0)) throw InvalidSpec("nonpositive survival inside the fit window");
    if (s.survival < kLogFloor) continue;
    xs.push_back(std::log(s.time));
    ys.push_back(std::log(s.survival));
  }
  if (xs.size() < kMinFitSamples) {
    throw InvalidSpec("power-law fit needs at least " + std::to_string(kMinFitSamples) +
                      " samples in the window, found " + std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidSpec("fit window spans a single time");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (intercept + slope * xs[i]);
    ss += r * r;
  }
  return {slope, std::exp(intercept), window, std::sqrt(ss / n), xs.size()};
}

inline DecayFit fit_powerlaw_decay(const SurvivalSeries& series) {
  return fit_powerlaw_decay(series, last_decade(series));
}

struct PlateauEstimate {
  double value = 0.0;
  double spread = 0.0;
  double window_fraction = 0.1;

  /// Flatness criterion for calling the tail a plateau.
  bool is_plateau(double relative_flatness = 0.01) const {
    return value > 0.0 && spread < relative_flatness * value;
  }
};

/// Mean and max-min spread over the trailing `window_fraction` of samples.
inline PlateauEstimate estimate_plateau(const SurvivalSeries& series, double window_fraction = 0.1) {
  if (!(window_fraction > 0.0 && window_fraction <= 0.5)) {
    throw InvalidSpec("window_fraction must lie in (0, 0.5]");
  }
  const std::size_t n = series.samples.size();
  const auto count = static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(n) - 1e-9));
  if (count == 0) throw InvalidSpec("plateau window is empty");
  double sum = 0.0;
  double lo = series.samples[n - count].survival, hi = lo;
  for (std::size_t k = n - count; k < n; ++k) {
    const double p = series.samples[k].survival;
    sum += p;
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  return {sum / static_cast<double>(count), hi - lo, window_fraction};
}

/// Least-squares slope of the outermost site (distance from `origin`) whose
/// occupancy exceeds `threshold`, against snapshot time.
inline double light_cone_speed(std::span<const Snapshot> snapshots, double threshold = 1e-6, int origin = 0) {
  if (snapshots.size() < 2) throw InvalidSpec("light-cone fit needs at least two snapshots");
  std::vector<double> ts, fronts;
  for (const auto& snap : snapshots) {
    const int half_width = static_cast<int>(snap.occupancy.size() / 2);
    std::optional<int> front;
    for (std::size_t k = 0; k < snap.occupancy.size(); ++k) {
      if (snap.occupancy[k] > threshold) {
        const int distance = std::abs(static_cast<int>(k) - half_width - origin);
        front = std::max(front.value_or(0), distance);
      }
    }
    if (!front) throw InvalidSpec("light-cone threshold never exceeded at t = " + std::to_string(snap.time));
    ts.push_back(snap.time);
    fronts.push_back(*front);
  }
  const double n = static_cast<double>(ts.size());
  double mt = 0.0, mf = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    mf += fronts[i];
  }
  mt /= n;
  mf /= n;
  double stt = 0.0, stf = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - mt) * (ts[i] - mt);
    stf += (ts[i] - mt) * (fronts[i] - mf);
  }
  if (!(stt > 0.0)) throw InvalidSpec("light-cone snapshots must span more than one time");
  return stf / stt;
}

struct ConvergenceRow {
  double beta = 0.0;
  double qrw_discrepancy = 0.0;  // coherent mesh vs continuum QRW, J = cos(b)/2
  double crw_discrepancy = 0.0;  // incoherent map vs continuum CRW, J = cos^2(b)/2
};

inline double max_abs_difference(const SurvivalSeries& a, const SurvivalSeries& b) {
  if (a.samples.size() != b.samples.size()) throw InvalidSpec("series lengths differ");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    worst = std::max(worst, std::abs(a.samples[k].survival - b.samples[k].survival));
  }
  return worst;
}

/// For each beta, compares the mesh survival with its continuum limit step
/// by step. Per-step mesh losses are used unchanged as continuum rates.
inline std::vector<ConvergenceRow> continuum_convergence_scan(const std::map<int, double>& traps,
                                                              std::span<const double> betas, long steps,
                                                              int initial_site = 0) {
  if (steps < 1) throw InvalidSpec("convergence scan needs at least one step");
  std::vector<double> times(static_cast<std::size_t>(steps));
  for (long m = 0; m < steps; ++m) times[static_cast<std::size_t>(m)] = static_cast<double>(m + 1);
  const double horizon = static_cast<double>(steps);

  std::vector<ConvergenceRow> rows;
  for (double beta : betas) {
    if (!(beta > 0.0 && beta < std::numbers::pi / 2)) throw InvalidSpec("beta must lie in (0, pi/2)");
    MeshSpec mesh;
    mesh.base.traps = traps;
    mesh.base.initial_site = initial_site;
    mesh.beta = beta;
    mesh.steps = steps;

    const MeshSpec coherent = make_mesh_grid(mesh, ModelTag::MeshCoherent);
    const SurvivalSeries mesh_q = run_mesh(coherent).series;
    LatticeSpec qrw{0.5 * std::cos(beta), traps, initial_site, 0};
    qrw = make_grid(qrw, horizon, ModelTag::QrwContinuum);
    const SurvivalSeries cont_q = run_qrw(qrw, horizon, times).series;

    const MeshSpec incoherent = make_mesh_grid(mesh, ModelTag::MeshIncoherent);
    const SurvivalSeries mesh_c = run_incoherent(incoherent).series;
    LatticeSpec crw{0.5 * std::cos(beta) * std::cos(beta), traps, initial_site, 0};
    crw = make_grid(crw, horizon, ModelTag::CrwContinuum);
    const SurvivalSeries cont_c = run_crw(crw, horizon, times).series;

    rows.push_back({beta, max_abs_difference(mesh_q, cont_q), max_abs_difference(mesh_c, cont_c)});
  }
  return rows;
}

}  // namespace trapwalk
