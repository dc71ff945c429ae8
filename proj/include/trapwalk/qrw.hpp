#pragma once

// Continuous-time quantum walk with lossy traps:
//   i dpsi_n/dt = s J (psi_{n+1} + psi_{n-1}) - i (gamma_n / 2) psi_n,  s = +/-1

#include <span>
#include <vector>

#include "trapwalk/expm.hpp"
#include "trapwalk/integrator.hpp"
#include "trapwalk/lattice.hpp"

namespace trapwalk {

struct QrwHamiltonian {
  Tridiagonal<Complex> h;
  int sign = 1;
  int half_width = 0;

  /// The generator A = -iH of dpsi/dt = A psi.
  Tridiagonal<Complex> generator() const {
    Tridiagonal<Complex> a(h.size());
    const Complex minus_i{0.0, -1.0};
    for (std::size_t k = 0; k < h.size(); ++k) {
      a.lower[k] = minus_i * h.lower[k];
      a.diag[k] = minus_i * h.diag[k];
      a.upper[k] = minus_i * h.upper[k];
    }
    return a;
  }
};

inline QrwHamiltonian build_qrw_hamiltonian(const LatticeSpec& spec, int sign = 1) {
  validate(spec);
  if (sign != 1 && sign != -1) throw InvalidSpec("envelope sign must be +1 or -1");
  const std::size_t n = spec.size();
  const double hop = sign * spec.hopping;
  const auto gamma = spec.rate_profile();
  QrwHamiltonian q{Tridiagonal<Complex>(n), sign, spec.half_width};
  for (std::size_t i = 0; i < n; ++i) {
    q.h.diag[i] = Complex{0.0, -0.5 * gamma[i]};
    if (i > 0) q.h.lower[i] = hop;
    if (i + 1 < n) q.h.upper[i] = hop;
  }
  return q;
}

/// Four times finer than the classical step: RK4 is not norm-preserving and
/// the coarser step drifts by ~3e-7 over Jt = 100.
inline double qrw_time_step(const LatticeSpec& spec) {
  return 0.04 / (4.0 * spec.hopping + 0.5 * spec.max_rate());
}

inline Trajectory<QuantumState> run_qrw(const LatticeSpec& spec, double t_end,
                                        std::span<const double> sample_times,
                                        const RunOptions& options = {}, int sign = 1) {
  check_sample_times(sample_times, t_end);
  const QrwHamiltonian ham = build_qrw_hamiltonian(spec, sign);
  const Tridiagonal<Complex> gen = ham.generator();
  const double dt = options.dt.value_or(qrw_time_step(spec));
  check_time_step(dt, t_end);

  std::vector<double> schedule(sample_times.begin(), sample_times.end());
  if (schedule.empty() || schedule.back() < t_end) schedule.push_back(t_end);
  const std::size_t recorded = sample_times.size();

  Trajectory<QuantumState> out;
  out.series.model = ModelTag::QrwContinuum;
  out.series.params.lattice = spec;
  QuantumState state = localized_quantum(spec);
  double previous = 1.0;

  std::size_t index = 0;
  integrate_to_samples(gen, state.amps, schedule, dt, [&](double t, std::vector<Complex>& psi) {
    double total = 0.0;
    for (const Complex& a : psi) total += std::norm(a);
    if (!std::isfinite(total) || total > previous + 1e-12) {
      throw NumericalError("quantum survival increased or diverged at t = " + std::to_string(t));
    }
    previous = total;
    if (options.enforce_edge_guard) {
      enforce_edge_guard(psi.size(), [&](std::size_t k) { return std::norm(psi[k]); }, total, t);
    }
    if (index < recorded) {
      out.series.samples.push_back({t, std::min(total, 1.0)});
      if (options.record_snapshots) {
        Snapshot snap{t, std::vector<double>(psi.size())};
        for (std::size_t k = 0; k < psi.size(); ++k) snap.occupancy[k] = std::norm(psi[k]);
        out.snapshots.push_back(std::move(snap));
      }
    }
    ++index;
  });
  state.time = t_end;
  out.final_state = std::move(state);
  return out;
}

/// psi(t) = exp(-iHt) delta_{n0} by dense matrix exponential.
inline QuantumState expm_oracle_qrw(const LatticeSpec& spec, double t, int sign = 1) {
  const QrwHamiltonian ham = build_qrw_hamiltonian(spec, sign);
  if (spec.size() > kMaxDenseOracleSites) {
    throw InvalidSpec("grid too large for dense oracle: " + std::to_string(spec.size()) + " sites");
  }
  return {expm_column(ham.generator(), t, spec.offset(spec.initial_site)), t};
}

}  // namespace trapwalk
