#pragma once

// Discrete-time two-loop mesh lattice:
//   u'_n = (cos(b) u_{n+1} + i sin(b) v_{n+1}) exp(-i phi_n - gamma_n)
//   v'_n =  cos(b) v_{n-1} + i sin(b) u_{n-1}
// plus the incoherent intensity map obtained by averaging over random phi,
// the dephased ensemble, and the slow-envelope projection of u.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "trapwalk/lattice.hpp"
#include "trapwalk/rng.hpp"

namespace trapwalk {

struct MeshSpec {
  LatticeSpec base;  // hopping unused; trap rates are per-step losses
  double beta = 0.0;
  PhaseMode phase_mode = PhaseMode::Off;
  std::uint64_t seed = 0;
  long steps = 1;
};

inline void validate(const MeshSpec& spec) {
  validate(spec.base);
  if (!(spec.beta > 0.0 && spec.beta < std::numbers::pi / 2)) {
    throw InvalidSpec("beta must lie in (0, pi/2)");
  }
  if (spec.steps < 1) throw InvalidSpec("steps must be at least 1");
}

/// Continuum hopping rate the mesh reproduces. The coherent mesh spreads
/// with maximal group velocity cos(b), i.e. J = cos(b)/2. Averaged
/// intensities perform a persistent walk with diffusion constant
/// cos^2(b) / (2 sin^2(b)), which tends to cos^2(b)/2 as b -> pi/2.
inline double mesh_effective_hopping(double beta, ModelTag model) {
  const double c = std::cos(beta);
  const double s = std::sin(beta);
  if (model == ModelTag::MeshCoherent) return 0.5 * c;
  return 0.5 * c * c / (s * s);
}

/// Enlarges spec.base.half_width so a run of spec.steps stays clear of the
/// walls under `model`.
inline MeshSpec make_mesh_grid(const MeshSpec& spec, ModelTag model) {
  if (!is_mesh_model(model)) throw InvalidSpec("make_mesh_grid needs a mesh model tag");
  if (!(spec.beta > 0.0 && spec.beta < std::numbers::pi / 2)) {
    throw InvalidSpec("beta must lie in (0, pi/2)");
  }
  LatticeSpec sizing = spec.base;
  sizing.hopping = mesh_effective_hopping(spec.beta, model);
  const LatticeSpec grown = make_grid(sizing, static_cast<double>(spec.steps), model);
  MeshSpec out = spec;
  out.base.half_width = grown.half_width;
  return out;
}

inline MeshState initial_mesh_state(const LatticeSpec& lattice) {
  MeshState s{std::vector<Complex>(lattice.size()), std::vector<Complex>(lattice.size()), 0};
  s.u[lattice.offset(lattice.initial_site)] = 1.0;
  return s;
}

/// Applies the two-loop map in place with precomputed coefficients.
/// cos(b), sin(b) nudged by a few ulps so that c^2 + s^2 is as close to 1
/// as doubles allow. The plain pair misses by up to ~1e-16, which the map
/// compounds every step.
inline std::pair<double, double> unit_coupler(double beta) {
  const double c0 = std::cos(beta), s0 = std::sin(beta);
  const auto shift = [](double x, int ulps) {
    for (; ulps > 0; --ulps) x = std::nextafter(x, 2.0);
    for (; ulps < 0; ++ulps) x = std::nextafter(x, -2.0);
    return x;
  };
  std::pair<double, double> best{c0, s0};
  long double best_err = std::numeric_limits<long double>::infinity();
  int best_cost = 0;
  for (int i = -4; i <= 4; ++i) {
    for (int j = -4; j <= 4; ++j) {
      const double c = shift(c0, i), s = shift(s0, j);
      const long double err =
          std::abs(static_cast<long double>(c) * c + static_cast<long double>(s) * s - 1.0L);
      const int cost = std::abs(i) + std::abs(j);
      if (err < best_err || (err == best_err && cost < best_cost)) {
        best = {c, s};
        best_err = err;
        best_cost = cost;
      }
    }
  }
  return best;
}

class MeshPropagator {
 public:
  explicit MeshPropagator(const MeshSpec& spec)
      : cos_(unit_coupler(spec.beta).first), sin_(unit_coupler(spec.beta).second), loss_(spec.base.size()) {
    const auto gamma = spec.base.rate_profile();
    for (std::size_t k = 0; k < loss_.size(); ++k) loss_[k] = std::exp(-gamma[k]);
    u_next_.resize(loss_.size());
    v_next_.resize(loss_.size());
  }

  std::size_t size() const { return loss_.size(); }

  /// `phases` is either empty (all zero) or holds one phase per offset.
  void step(MeshState& state, std::span<const double> phases) {
    const std::size_t n = loss_.size();
    const double c = cos_, s = sin_;
    for (std::size_t k = 0; k < n; ++k) {
      Complex a{};
      if (k + 1 < n) {
        const Complex& u = state.u[k + 1];
        const Complex& v = state.v[k + 1];
        a = Complex{c * u.real() - s * v.imag(), c * u.imag() + s * v.real()};
      }
      if (phases.empty()) {
        u_next_[k] = a * loss_[k];
      } else {
        const double cp = loss_[k] * std::cos(phases[k]);
        const double sp = loss_[k] * std::sin(phases[k]);
        // a * (cp - i sp)
        u_next_[k] = Complex{a.real() * cp + a.imag() * sp, a.imag() * cp - a.real() * sp};
      }
      if (k > 0) {
        const Complex& u = state.u[k - 1];
        const Complex& v = state.v[k - 1];
        v_next_[k] = Complex{c * v.real() - s * u.imag(), c * v.imag() + s * u.real()};
      } else {
        v_next_[k] = Complex{};
      }
    }
    state.u.swap(u_next_);
    state.v.swap(v_next_);
    ++state.step;
  }

 private:
  double cos_, sin_;
  std::vector<double> loss_;
  std::vector<Complex> u_next_, v_next_;
};

/// One application of the map. Out-of-grid neighbours read as zero.
inline MeshState mesh_step(const MeshState& state, const MeshSpec& spec, std::span<const double> phases) {
  if (state.u.size() != spec.base.size() || state.v.size() != spec.base.size()) {
    throw InvalidSpec("mesh state size does not match the grid");
  }
  if (!phases.empty() && phases.size() != spec.base.size()) {
    throw InvalidSpec("phase vector length does not match the grid");
  }
  MeshState next = state;
  MeshPropagator(spec).step(next, phases);
  return next;
}

struct MeshRunOptions {
  bool record_snapshots = false;
  long snapshot_stride = 1;
  bool enforce_edge_guard = true;
  std::function<void(const MeshState&)> observer;  // sees the initial state and every step
};

struct MeshRun {
  SurvivalSeries series;
  std::vector<Snapshot> snapshots;
  MeshState final_state;
};

inline Snapshot mesh_snapshot(const MeshState& s) {
  Snapshot snap{static_cast<double>(s.step), std::vector<double>(s.u.size())};
  for (std::size_t k = 0; k < s.u.size(); ++k) snap.occupancy[k] = std::norm(s.u[k]) + std::norm(s.v[k]);
  return snap;
}

/// From u = delta_{n0}, v = 0 applies `spec.steps` steps, recording survival
/// after each. Random phases are drawn from PhaseField(spec.seed).
inline MeshRun run_mesh(const MeshSpec& spec, const MeshRunOptions& options = {}) {
  validate(spec);
  MeshPropagator prop(spec);
  MeshState state = initial_mesh_state(spec.base);
  const bool random = spec.phase_mode == PhaseMode::UniformRandom;
  const PhaseField field(spec.seed);
  std::vector<double> phases(random ? spec.base.size() : 0);

  MeshRun out;
  out.series.model = random ? ModelTag::MeshDephasedSingle : ModelTag::MeshCoherent;
  out.series.params.lattice = spec.base;
  out.series.params.beta = spec.beta;
  out.series.params.phase_mode = spec.phase_mode;
  if (random) out.series.params.seed = spec.seed;
  out.series.samples.reserve(static_cast<std::size_t>(spec.steps));
  if (options.observer) options.observer(state);

  const long stride = std::max(1L, options.snapshot_stride);
  for (long m = 0; m < spec.steps; ++m) {
    if (random) field.fill(static_cast<std::uint64_t>(m), std::span<double>(phases));
    prop.step(state, phases);
    const double total = survival(state);
    if (!std::isfinite(total)) throw NumericalError("mesh intensity diverged at step " + std::to_string(m + 1));
    if (options.enforce_edge_guard) {
      enforce_edge_guard(
          state.u.size(), [&](std::size_t k) { return std::norm(state.u[k]) + std::norm(state.v[k]); }, total,
          static_cast<double>(state.step));
    }
    out.series.samples.push_back({static_cast<double>(state.step), std::min(total, 1.0)});
    if (options.record_snapshots && state.step % stride == 0) out.snapshots.push_back(mesh_snapshot(state));
    if (options.observer) options.observer(state);
  }
  out.final_state = std::move(state);
  return out;
}

struct EnsembleResult {
  SurvivalSeries series;         // per-step mean survival
  std::vector<double> std_dev;   // per-step sample standard deviation
};

/// Averages `realizations` dephased runs; realization r uses the stream seed
/// derive_stream_seed(spec.seed, r). Realizations may run on any number of
/// threads; the reduction runs in realization order afterwards, so the
/// result does not depend on `threads`.
inline EnsembleResult run_mesh_ensemble(const MeshSpec& spec, std::size_t realizations, unsigned threads = 0) {
  validate(spec);
  if (spec.phase_mode != PhaseMode::UniformRandom) {
    throw InvalidSpec("ensemble runs need phase_mode = uniform_random");
  }
  if (realizations < 1) throw InvalidSpec("realizations must be at least 1");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, realizations));

  const auto steps = static_cast<std::size_t>(spec.steps);
  std::vector<std::vector<double>> per_run(realizations);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= realizations) return;
      try {
        MeshSpec one = spec;
        one.seed = derive_stream_seed(spec.seed, r);
        per_run[r] = run_mesh(one).series.values();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(realizations);
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleResult out;
  out.series.model = ModelTag::MeshDephasedEnsemble;
  out.series.params.lattice = spec.base;
  out.series.params.beta = spec.beta;
  out.series.params.phase_mode = spec.phase_mode;
  out.series.params.seed = spec.seed;
  out.series.params.realizations = realizations;
  out.series.samples.reserve(steps);
  out.std_dev.reserve(steps);
  const double count = static_cast<double>(realizations);
  for (std::size_t m = 0; m < steps; ++m) {
    double sum = 0.0;
    for (std::size_t r = 0; r < realizations; ++r) sum += per_run[r][m];
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t r = 0; r < realizations; ++r) {
      const double d = per_run[r][m] - mean;
      sq += d * d;
    }
    out.series.samples.push_back({static_cast<double>(m + 1), mean});
    out.std_dev.push_back(realizations > 1 ? std::sqrt(sq / (count - 1.0)) : 0.0);
  }
  return out;
}

/// Averaged intensities: x_n ~ <|u_n|^2>, y_n ~ <|v_{n+1}|^2>.
struct IntensityState {
  std::vector<double> x;
  std::vector<double> y;
  long step = 0;
};

inline IntensityState initial_intensity_state(const LatticeSpec& lattice) {
  IntensityState s{std::vector<double>(lattice.size()), std::vector<double>(lattice.size()), 0};
  s.x[lattice.offset(lattice.initial_site)] = 1.0;
  return s;
}

inline double survival(const IntensityState& state) {
  double total = 0.0;
  for (std::size_t k = 0; k < state.x.size(); ++k) total += state.x[k] + state.y[k];
  return total;
}

namespace detail {

class IncoherentPropagator {
 public:
  explicit IncoherentPropagator(const MeshSpec& spec)
      : cos2_(std::cos(spec.beta) * std::cos(spec.beta)),
        sin2_(std::sin(spec.beta) * std::sin(spec.beta)),
        loss_(spec.base.size()),
        x_next_(spec.base.size()),
        y_next_(spec.base.size()) {
    const auto gamma = spec.base.rate_profile();
    for (std::size_t k = 0; k < loss_.size(); ++k) loss_[k] = std::exp(-2.0 * gamma[k]);
  }

  void step(IntensityState& s) {
    const std::size_t n = loss_.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double x_right = k + 1 < n ? s.x[k + 1] : 0.0;
      const double y_left = k > 0 ? s.y[k - 1] : 0.0;
      x_next_[k] = (x_right * cos2_ + s.y[k] * sin2_) * loss_[k];
      y_next_[k] = s.x[k] * sin2_ + y_left * cos2_;
    }
    s.x.swap(x_next_);
    s.y.swap(y_next_);
    ++s.step;
  }

 private:
  double cos2_, sin2_;
  std::vector<double> loss_;
  std::vector<double> x_next_, y_next_;
};

}  // namespace detail

inline IntensityState incoherent_step(const IntensityState& state, const MeshSpec& spec) {
  if (state.x.size() != spec.base.size() || state.y.size() != spec.base.size()) {
    throw InvalidSpec("intensity state size does not match the grid");
  }
  IntensityState next = state;
  detail::IncoherentPropagator(spec).step(next);
  return next;
}

struct IncoherentRun {
  SurvivalSeries series;
  std::vector<Snapshot> snapshots;
  IntensityState final_state;
};

/// Deterministic intensity map from x = delta_{n0}, y = 0.
inline IncoherentRun run_incoherent(const MeshSpec& spec, const MeshRunOptions& options = {}) {
  validate(spec);
  detail::IncoherentPropagator prop(spec);
  IntensityState state = initial_intensity_state(spec.base);
  IncoherentRun out;
  out.series.model = ModelTag::MeshIncoherent;
  out.series.params.lattice = spec.base;
  out.series.params.beta = spec.beta;
  out.series.samples.reserve(static_cast<std::size_t>(spec.steps));
  const long stride = std::max(1L, options.snapshot_stride);
  double previous = 1.0;
  for (long m = 0; m < spec.steps; ++m) {
    prop.step(state);
    const double total = survival(state);
    if (!std::isfinite(total) || total > previous + 1e-12) {
      throw NumericalError("incoherent intensity increased at step " + std::to_string(m + 1));
    }
    previous = total;
    if (options.enforce_edge_guard) {
      enforce_edge_guard(state.x.size(), [&](std::size_t k) { return state.x[k] + state.y[k]; }, total,
                         static_cast<double>(state.step));
    }
    out.series.samples.push_back({static_cast<double>(state.step), std::min(total, 1.0)});
    if (options.record_snapshots && state.step % stride == 0) {
      Snapshot snap{static_cast<double>(state.step), std::vector<double>(state.x.size())};
      for (std::size_t k = 0; k < state.x.size(); ++k) snap.occupancy[k] = state.x[k] + state.y[k];
      out.snapshots.push_back(std::move(snap));
    }
  }
  out.final_state = std::move(state);
  return out;
}

/// Slow envelopes psi^(+) and psi^(-) of u, one entry per consecutive pair
/// of steps (m, m+1) in the history.
struct EnvelopePair {
  std::vector<long> steps;
  std::vector<std::vector<Complex>> plus;
  std::vector<std::vector<Complex>> minus;
};

namespace detail {

/// i^{-m}, exact.
inline Complex inverse_i_power(long m) {
  switch (((m % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, -1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, 1.0};
  }
}

}  // namespace detail

/// With a_m = i^{-m} u^(m) = psi+ + (-1)^m psi-, consecutive steps give
///   psi+ = (a_m + a_{m+1}) / 2,   psi- = (-1)^m (a_m - a_{m+1}) / 2.
inline EnvelopePair envelope_project(std::span<const MeshState> history) {
  if (history.size() < 2) throw InvalidSpec("envelope projection needs at least two consecutive steps");
  EnvelopePair out;
  for (std::size_t k = 0; k + 1 < history.size(); ++k) {
    const MeshState& now = history[k];
    const MeshState& next = history[k + 1];
    if (next.step != now.step + 1) throw InvalidSpec("envelope projection needs consecutive steps");
    if (now.u.size() != next.u.size()) throw InvalidSpec("grid size changed within the history");
    const long m = now.step;
    const Complex dm = detail::inverse_i_power(m);
    const Complex dn = detail::inverse_i_power(m + 1);
    const double parity = (m % 2 == 0) ? 1.0 : -1.0;
    std::vector<Complex> plus(now.u.size()), minus(now.u.size());
    for (std::size_t j = 0; j < now.u.size(); ++j) {
      const Complex a0 = dm * now.u[j];
      const Complex a1 = dn * next.u[j];
      plus[j] = 0.5 * (a0 + a1);
      minus[j] = 0.5 * parity * (a0 - a1);
    }
    out.steps.push_back(m);
    out.plus.push_back(std::move(plus));
    out.minus.push_back(std::move(minus));
  }
  return out;
}

}  // namespace trapwalk
