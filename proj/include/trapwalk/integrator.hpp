#pragma once

// Fixed-step classical RK4 for linear systems dy/dt = A y with a tridiagonal
// A. Shared by the classical and quantum continuum runners.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "trapwalk/lattice.hpp"

namespace trapwalk {

namespace detail {

// Plain complex product. The library version guards against inf/nan
// operands through a libcall, which triples the cost of a QRW step.
template <class T>
inline T mul(const T& a, const T& b) {
  return a * b;
}

template <>
inline Complex mul(const Complex& a, const Complex& b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

}  // namespace detail

/// Tridiagonal matrix stored by bands. lower[i] multiplies x[i-1] in row i
/// and upper[i] multiplies x[i+1]; lower[0] and upper[n-1] are always zero.
template <class T>
struct Tridiagonal {
  std::vector<T> lower;
  std::vector<T> diag;
  std::vector<T> upper;

  explicit Tridiagonal(std::size_t n = 0) : lower(n, T{}), diag(n, T{}), upper(n, T{}) {}

  std::size_t size() const { return diag.size(); }

  T at(std::size_t row, std::size_t col) const {
    if (row == col) return diag[row];
    if (col + 1 == row) return lower[row];
    if (row + 1 == col) return upper[row];
    return T{};
  }

  void apply(std::span<const T> x, std::span<T> y) const {
    const std::size_t n = size();
    using detail::mul;
    if (n == 1) {
      y[0] = mul(diag[0], x[0]);
      return;
    }
    y[0] = mul(diag[0], x[0]) + mul(upper[0], x[1]);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      y[i] = mul(lower[i], x[i - 1]) + mul(diag[i], x[i]) + mul(upper[i], x[i + 1]);
    }
    y[n - 1] = mul(lower[n - 1], x[n - 2]) + mul(diag[n - 1], x[n - 1]);
  }
};

/// Owns the stage buffers so repeated steps do not allocate.
template <class T>
class Rk4Stepper {
 public:
  explicit Rk4Stepper(const Tridiagonal<T>& op)
      : op_(op), k1_(op.size()), k2_(op.size()), k3_(op.size()), k4_(op.size()), tmp_(op.size()) {}

  void step(std::vector<T>& y, double h) {
    const std::size_t n = y.size();
    const double half = 0.5 * h;
    op_.apply(y, k1_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + half * k1_[i];
    op_.apply(tmp_, k2_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + half * k2_[i];
    op_.apply(tmp_, k3_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * k3_[i];
    op_.apply(tmp_, k4_);
    const double sixth = h / 6.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += sixth * (k1_[i] + 2.0 * (k2_[i] + k3_[i]) + k4_[i]);
    }
  }

  /// Advances by exactly `duration` using steps of `dt`; the last step is
  /// shortened to land on the target.
  void advance(std::vector<T>& y, double duration, double dt) {
    if (duration <= 0.0) return;
    const double ratio = duration / dt;
    const auto full = static_cast<long long>(std::floor(ratio + 1e-9));
    for (long long k = 0; k < full; ++k) step(y, dt);
    const double rest = duration - static_cast<double>(full) * dt;
    if (rest > 1e-9 * dt) step(y, rest);
  }

 private:
  const Tridiagonal<T>& op_;
  std::vector<T> k1_, k2_, k3_, k4_, tmp_;
};

struct RunOptions {
  std::optional<double> dt;  // overrides the model's default step
  bool record_snapshots = false;
  bool enforce_edge_guard = true;
};

template <class State>
struct Trajectory {
  SurvivalSeries series;
  std::vector<Snapshot> snapshots;  // one per sample when requested
  State final_state;
};

/// Upper bound on the number of steps a single run may take.
inline constexpr double kMaxSteps = 1e11;

/// Validates a sample schedule: strictly increasing, within (0, t_end].
inline void check_sample_times(std::span<const double> times, double t_end) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InvalidSpec("t_end must be positive and finite");
  double prev = 0.0;
  for (double t : times) {
    if (!(t > prev)) throw InvalidSpec("sample times must be strictly increasing and positive");
    if (t > t_end * (1.0 + 1e-12)) throw InvalidSpec("sample time beyond t_end");
    prev = t;
  }
}

inline void check_time_step(double dt, double t_end) {
  if (!(dt > 0.0) || !std::isfinite(dt) || t_end / dt > kMaxSteps) {
    throw NumericalError("step-size underflow: dt = " + std::to_string(dt));
  }
}

/// Integrates y from time 0 through each sample time in turn, invoking
/// `on_sample(t, y)` after landing exactly on t.
template <class T, class OnSample>
void integrate_to_samples(const Tridiagonal<T>& op, std::vector<T>& y, std::span<const double> times,
                          double dt, OnSample&& on_sample) {
  Rk4Stepper<T> stepper(op);
  double t = 0.0;
  for (double target : times) {
    stepper.advance(y, target - t, dt);
    t = target;
    on_sample(t, y);
  }
}

}  // namespace trapwalk
