#pragma once

// Shared lattice types, grid sizing, edge guard and survival accounting.
//
// Site indexing convention used by every module: a grid of half-width N spans
// sites -N..+N and stores site n at vector offset n + N.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trapwalk {

using Complex = std::complex<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration.
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

/// The truncated grid was too small: occupancy reached the hard wall.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Integration produced an unphysical state.
class NumericalError : public Error {
 public:
  using Error::Error;
};

enum class ModelTag {
  CrwContinuum,
  QrwContinuum,
  MeshCoherent,
  MeshDephasedSingle,
  MeshDephasedEnsemble,
  MeshIncoherent,
};

inline constexpr ModelTag kAllModels[] = {
    ModelTag::CrwContinuum,       ModelTag::QrwContinuum,         ModelTag::MeshCoherent,
    ModelTag::MeshDephasedSingle, ModelTag::MeshDephasedEnsemble, ModelTag::MeshIncoherent,
};

inline std::string_view to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::CrwContinuum: return "CRW_CONTINUUM";
    case ModelTag::QrwContinuum: return "QRW_CONTINUUM";
    case ModelTag::MeshCoherent: return "MESH_COHERENT";
    case ModelTag::MeshDephasedSingle: return "MESH_DEPHASED_SINGLE";
    case ModelTag::MeshDephasedEnsemble: return "MESH_DEPHASED_ENSEMBLE";
    case ModelTag::MeshIncoherent: return "MESH_INCOHERENT";
  }
  return "UNKNOWN";
}

inline std::optional<ModelTag> parse_model_tag(std::string_view name) {
  for (ModelTag tag : kAllModels) {
    if (to_string(tag) == name) return tag;
  }
  return std::nullopt;
}

inline bool is_mesh_model(ModelTag tag) {
  return tag != ModelTag::CrwContinuum && tag != ModelTag::QrwContinuum;
}

/// Coherent dynamics spread ballistically; everything else diffusively.
inline bool is_ballistic(ModelTag tag) {
  return tag == ModelTag::QrwContinuum || tag == ModelTag::MeshCoherent;
}

/// Models whose survival can only leak, never oscillate.
inline bool is_classical(ModelTag tag) {
  return tag == ModelTag::CrwContinuum || tag == ModelTag::MeshIncoherent;
}

struct LatticeSpec {
  double hopping = 1.0;
  std::map<int, double> traps;  // site -> annihilation rate
  int initial_site = 0;
  int half_width = 0;

  std::size_t size() const { return 2 * static_cast<std::size_t>(half_width) + 1; }
  std::size_t offset(int site) const { return static_cast<std::size_t>(site + half_width); }
  int site(std::size_t offset) const { return static_cast<int>(offset) - half_width; }

  double max_rate() const {
    double m = 0.0;
    for (const auto& [site, rate] : traps) m = std::max(m, rate);
    return m;
  }

  /// Loss rate at every grid offset.
  std::vector<double> rate_profile() const {
    std::vector<double> gamma(size(), 0.0);
    for (const auto& [site, rate] : traps) gamma[offset(site)] = rate;
    return gamma;
  }

  bool operator==(const LatticeSpec&) const = default;
};

namespace detail {

inline std::vector<std::string> rate_problems(const LatticeSpec& spec) {
  std::vector<std::string> problems;
  if (!(spec.hopping > 0.0) || !std::isfinite(spec.hopping)) {
    problems.push_back("hopping must be positive and finite");
  }
  for (const auto& [site, rate] : spec.traps) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
      std::ostringstream os;
      os << "trap at site " << site << " has invalid rate " << rate;
      problems.push_back(os.str());
    }
  }
  if (spec.half_width < 0) problems.push_back("half_width must be nonnegative");
  return problems;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

}  // namespace detail

/// Throws InvalidSpec listing every violated invariant.
inline void validate(const LatticeSpec& spec) {
  auto problems = detail::rate_problems(spec);
  if (std::abs(spec.initial_site) > spec.half_width) {
    problems.push_back("initial_site " + std::to_string(spec.initial_site) +
                       " lies outside the grid of half-width " +
                       std::to_string(spec.half_width));
  }
  for (const auto& [site, rate] : spec.traps) {
    if (std::abs(site) > spec.half_width) {
      problems.push_back("trap site " + std::to_string(site) + " lies outside the grid of half-width " +
                         std::to_string(spec.half_width));
    }
  }
  if (!problems.empty()) throw InvalidSpec("invalid lattice: " + detail::join(problems));
}

// Truncation policy.
inline constexpr int kGridMargin = 20;
inline constexpr double kBallisticSafety = 1.2;
inline constexpr double kDiffusiveSigmas = 8.0;
inline constexpr int kMinDiffusiveWidth = 8;
inline constexpr int kMaxHalfWidth = 1 << 24;

/// Half-width needed for `spec` to stay clear of the walls up to `horizon`.
/// `spec.hopping` is read as the effective hopping of the model.
inline long long required_half_width(const LatticeSpec& spec, double horizon, ModelTag model) {
  long long trap_offset = 0;
  for (const auto& [site, rate] : spec.traps) {
    trap_offset = std::max(trap_offset, std::llabs(static_cast<long long>(site) - spec.initial_site));
  }
  const double j = spec.hopping;
  double spread = 0.0;
  if (is_ballistic(model)) {
    spread = std::ceil(2.0 * kBallisticSafety * j * horizon - 1e-9);
  } else {
    spread = std::max<double>(kMinDiffusiveWidth,
                              std::ceil(kDiffusiveSigmas * std::sqrt(2.0 * j * horizon) - 1e-9));
  }
  if (!(spread < 4.0 * kMaxHalfWidth)) return 4LL * kMaxHalfWidth;
  return std::llabs(spec.initial_site) + trap_offset + static_cast<long long>(spread) + kGridMargin;
}

/// Returns `spec` with its half-width enlarged (never shrunk) to satisfy the
/// truncation policy for a run of length `horizon`.
inline LatticeSpec make_grid(const LatticeSpec& spec, double horizon, ModelTag model) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidSpec("make_grid: horizon must be positive and finite");
  }
  auto problems = detail::rate_problems(spec);
  if (!problems.empty()) throw InvalidSpec("invalid lattice: " + detail::join(problems));

  const long long needed = required_half_width(spec, horizon, model);
  if (needed > kMaxHalfWidth) {
    throw InvalidSpec("make_grid: required half-width " + std::to_string(needed) +
                      " exceeds the representable limit " + std::to_string(kMaxHalfWidth));
  }
  LatticeSpec out = spec;
  out.half_width = std::max(spec.half_width, static_cast<int>(needed));
  validate(out);
  return out;
}

struct ClassicalState {
  std::vector<double> probs;
  double time = 0.0;
};

struct QuantumState {
  std::vector<Complex> amps;
  double time = 0.0;
};

struct MeshState {
  std::vector<Complex> u;
  std::vector<Complex> v;
  long step = 0;
};

inline ClassicalState localized_classical(const LatticeSpec& spec) {
  ClassicalState s{std::vector<double>(spec.size(), 0.0), 0.0};
  s.probs[spec.offset(spec.initial_site)] = 1.0;
  return s;
}

inline QuantumState localized_quantum(const LatticeSpec& spec) {
  QuantumState s{std::vector<Complex>(spec.size(), Complex{}), 0.0};
  s.amps[spec.offset(spec.initial_site)] = 1.0;
  return s;
}

inline double survival(const ClassicalState& state) {
  double total = 0.0;
  for (double p : state.probs) total += p;
  return total;
}

inline double survival(const QuantumState& state) {
  double total = 0.0;
  for (const Complex& a : state.amps) total += std::norm(a);
  return total;
}

/// Sum of |u_n|^2 + |v_{n+1}|^2 for n = -N-1..N. The u slot at n = -N-1 is
/// zero padding paired with v_{-N}; v_{N+1} is zero padding.
inline double survival(const MeshState& state) {
  const std::size_t n = state.u.size();
  double total = n > 0 ? std::norm(state.v[0]) : 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    total += std::norm(state.u[k]);
    if (k + 1 < n) total += std::norm(state.v[k + 1]);
  }
  return total;
}

// Edge guard.
inline constexpr std::size_t kEdgeSites = 5;
inline constexpr double kEdgeTolerance = 1e-12;

/// Throws TruncationError if the outermost kEdgeSites on either edge hold
/// more than kEdgeTolerance * survival. `occupancy(k)` is the occupancy at
/// offset k of a grid with `n` offsets.
template <class Occupancy>
void enforce_edge_guard(std::size_t n, Occupancy&& occupancy, double current_survival, double time) {
  const std::size_t width = std::min(kEdgeSites, n);
  double left = 0.0, right = 0.0;
  for (std::size_t k = 0; k < width; ++k) {
    left += occupancy(k);
    right += occupancy(n - 1 - k);
  }
  const double limit = kEdgeTolerance * current_survival;
  if (left >= limit && left > 0.0) {
    std::ostringstream os;
    os << "edge guard: occupancy " << left << " on the left edge at time " << time
       << " exceeds " << limit << "; enlarge the grid";
    throw TruncationError(os.str());
  }
  if (right >= limit && right > 0.0) {
    std::ostringstream os;
    os << "edge guard: occupancy " << right << " on the right edge at time " << time
       << " exceeds " << limit << "; enlarge the grid";
    throw TruncationError(os.str());
  }
}

enum class PhaseMode { Off, UniformRandom };

inline std::string_view to_string(PhaseMode mode) {
  return mode == PhaseMode::Off ? "off" : "uniform_random";
}

/// Reproducibility record attached to every survival series.
struct RunDigest {
  LatticeSpec lattice;
  std::optional<double> beta;
  std::optional<PhaseMode> phase_mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> realizations;

  bool operator==(const RunDigest&) const = default;
};

struct SurvivalSample {
  double time;
  double survival;

  bool operator==(const SurvivalSample&) const = default;
};

struct SurvivalSeries {
  std::vector<SurvivalSample> samples;
  ModelTag model = ModelTag::CrwContinuum;
  RunDigest params;

  std::vector<double> times() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.time);
    return out;
  }
  std::vector<double> values() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.survival);
    return out;
  }
};

/// Checks ordering, range and (for classical models) monotone decay.
inline bool satisfies_invariants(const SurvivalSeries& series, double tol = 1e-12) {
  for (std::size_t k = 0; k < series.samples.size(); ++k) {
    const auto& s = series.samples[k];
    if (!(s.survival >= -tol && s.survival <= 1.0 + tol)) return false;
    if (k == 0) continue;
    const auto& prev = series.samples[k - 1];
    if (!(s.time > prev.time)) return false;
    if (is_classical(series.model) && s.survival > prev.survival + tol) return false;
  }
  return true;
}

/// Occupancy profile at one instant, indexed by grid offset.
struct Snapshot {
  double time = 0.0;
  std::vector<double> occupancy;
};

}  // namespace trapwalk
