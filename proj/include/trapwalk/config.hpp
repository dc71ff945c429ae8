#pragma once

// Experiment configuration: JSON schema, validation with per-field error
// paths, and the preset registry.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trapwalk/analysis.hpp"
#include "trapwalk/lattice.hpp"
#include "trapwalk/mesh.hpp"

namespace trapwalk {

using json = nlohmann::json;

enum class SamplingMode { Log, Linear, Explicit, PerStep };

inline std::string_view to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::Log: return "log";
    case SamplingMode::Linear: return "linear";
    case SamplingMode::Explicit: return "explicit";
    case SamplingMode::PerStep: return "per_step";
  }
  return "?";
}

struct SamplingConfig {
  SamplingMode mode = SamplingMode::PerStep;
  double t_start = 0.0;
  double t_end = 0.0;
  long count = 0;
  std::vector<double> times;  // explicit mode only

  bool operator==(const SamplingConfig&) const = default;
};

struct MeshConfig {
  double beta = 0.0;
  PhaseMode phase_mode = PhaseMode::Off;
  long steps = 0;
  std::uint64_t seed = 0;
  std::size_t realizations = 1;
  bool overlay_incoherent = false;

  bool operator==(const MeshConfig&) const = default;
};

enum class AnalysisKind { Powerlaw, Plateau, Lightcone, Convergence };

inline std::string_view to_string(AnalysisKind kind) {
  switch (kind) {
    case AnalysisKind::Powerlaw: return "powerlaw";
    case AnalysisKind::Plateau: return "plateau";
    case AnalysisKind::Lightcone: return "lightcone";
    case AnalysisKind::Convergence: return "convergence";
  }
  return "?";
}

struct AnalysisRequest {
  AnalysisKind kind = AnalysisKind::Powerlaw;
  std::optional<FitWindow> window;  // powerlaw; defaults to the last decade
  double window_fraction = 0.1;     // plateau
  double threshold = 1e-6;          // lightcone
  std::vector<double> betas;        // convergence
  long steps = 0;                   // convergence

  bool operator==(const AnalysisRequest&) const = default;
};

struct OutputConfig {
  std::string dir;
  std::vector<std::string> formats{"csv", "json"};
  bool snapshots = false;
  long snapshot_stride = 1;

  bool has(std::string_view format) const {
    for (const auto& f : formats) {
      if (f == format) return true;
    }
    return false;
  }
  bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
  std::string preset;  // empty unless expanded from one
  ModelTag model = ModelTag::CrwContinuum;
  LatticeSpec lattice;  // half_width 0 = size automatically
  std::optional<MeshConfig> mesh;
  SamplingConfig sampling;
  std::vector<AnalysisRequest> analysis;
  OutputConfig output;

  bool operator==(const ExperimentConfig&) const = default;
};

struct ConfigError {
  std::string path;  // e.g. "mesh.beta", "lattice.traps[2].rate"; empty for the document
  std::string message;
};

inline std::string format_errors(const std::vector<ConfigError>& errors) {
  std::string out;
  for (const auto& e : errors) {
    out += (e.path.empty() ? std::string("<document>") : e.path) + ": " + e.message + "\n";
  }
  return out;
}

/// Thrown by helpers that need a valid config; carries every diagnostic.
class ConfigInvalid : public InvalidSpec {
 public:
  explicit ConfigInvalid(std::vector<ConfigError> errors)
      : InvalidSpec("invalid config:\n" + format_errors(errors)), errors_(std::move(errors)) {}
  const std::vector<ConfigError>& errors() const { return errors_; }

 private:
  std::vector<ConfigError> errors_;
};

inline constexpr long kMaxSamples = 10'000'000;
inline constexpr long kMaxMeshSteps = 10'000'000;
inline constexpr std::size_t kMaxRealizations = 1'000'000;
inline constexpr std::string_view kOutDirVariable = "TRAPWALK_OUT_DIR";

inline std::string default_output_dir() {
  if (const char* env = std::getenv(kOutDirVariable.data()); env && *env) return env;
  return "trapwalk-out";
}

// ---------------------------------------------------------------- presets

struct Preset {
  std::string name;
  std::string description;
  json document;
};

namespace detail {

struct TrapPlacement {
  std::string_view name;
  int sites[4];
};

// Representative irregular placements; any placement shows the same laws.
inline constexpr TrapPlacement kPlacements[] = {
    {"I", {-4, -1, 2, 3}},
    {"II", {-2, 1, 3, 6}},
    {"III", {1, 2, 4, 7}},
};
inline constexpr double kContinuumRates[] = {1.0, 0.4, 1.5, 0.6};
inline constexpr double kMeshRates[] = {0.1, 0.04, 0.15, 0.06};
inline constexpr double kFig3Beta = 0.8 * std::numbers::pi / 2;
inline constexpr long kFig3Steps = 2000;
inline constexpr std::uint64_t kPresetSeed = 1;

inline json trap_list(const TrapPlacement& p, const double (&rates)[4]) {
  json traps = json::array();
  for (int k = 0; k < 4; ++k) traps.push_back({{"site", p.sites[k]}, {"rate", rates[k]}});
  return traps;
}

inline json lattice_block(const TrapPlacement& p, const double (&rates)[4]) {
  return {{"hopping", 1.0}, {"initial_site", 0}, {"half_width", 0}, {"traps", trap_list(p, rates)}};
}

inline json fig3_mesh(std::string_view phase_mode) {
  return {{"beta", kFig3Beta}, {"phase_mode", phase_mode}, {"steps", kFig3Steps}};
}

inline std::vector<Preset> build_presets() {
  std::vector<Preset> out;
  for (const auto& p : kPlacements) {
    const std::string tag(p.name);
    out.push_back({"fig2-crw-" + tag, "continuum CRW to Jt=1e4, traps " + tag + ", power-law fit over [1e3, 1e4]",
                   {{"model", "CRW_CONTINUUM"},
                    {"lattice", lattice_block(p, kContinuumRates)},
                    {"sampling", {{"mode", "log"}, {"t_start", 0.1}, {"t_end", 1.0e4}, {"count", 251}}},
                    {"analysis", json::array({{{"kind", "powerlaw"}, {"t_lo", 1.0e3}, {"t_hi", 1.0e4}}})}}});
  }
  for (const auto& p : kPlacements) {
    const std::string tag(p.name);
    out.push_back({"fig2-qrw-" + tag, "continuum QRW to Jt=2000, traps " + tag + ", trailing 10% plateau",
                   {{"model", "QRW_CONTINUUM"},
                    {"lattice", lattice_block(p, kContinuumRates)},
                    {"sampling", {{"mode", "linear"}, {"t_start", 1.0}, {"t_end", 2000.0}, {"count", 2000}}},
                    {"analysis", json::array({{{"kind", "plateau"}, {"window_fraction", 0.1}}})}}});
  }
  for (const auto& p : kPlacements) {
    const std::string tag(p.name);
    out.push_back({"fig3-qrw-" + tag, "coherent mesh, beta=0.8*pi/2, 2000 steps, traps " + tag,
                   {{"model", "MESH_COHERENT"},
                    {"lattice", lattice_block(p, kMeshRates)},
                    {"mesh", fig3_mesh("off")},
                    {"analysis", json::array({{{"kind", "plateau"}, {"window_fraction", 0.1}}})}}});
  }
  for (const auto& p : kPlacements) {
    const std::string tag(p.name);
    json mesh = fig3_mesh("uniform_random");
    mesh["seed"] = kPresetSeed;
    mesh["realizations"] = 1000;
    mesh["overlay_incoherent"] = true;
    out.push_back({"fig3-crw-" + tag + "-ensemble",
                   "dephased mesh, 1000 realizations with incoherent-map overlay, traps " + tag,
                   {{"model", "MESH_DEPHASED_ENSEMBLE"},
                    {"lattice", lattice_block(p, kMeshRates)},
                    {"mesh", mesh},
                    {"analysis", json::array({{{"kind", "powerlaw"}, {"t_lo", 1000.0}, {"t_hi", 2000.0}}})}}});
  }
  for (const auto& p : kPlacements) {
    const std::string tag(p.name);
    json mesh = fig3_mesh("uniform_random");
    mesh["seed"] = kPresetSeed;
    out.push_back({"fig3-crw-" + tag + "-single", "one dephased mesh realization, traps " + tag,
                   {{"model", "MESH_DEPHASED_SINGLE"}, {"lattice", lattice_block(p, kMeshRates)}, {"mesh", mesh}}});
  }
  for (const auto& p : kPlacements) {
    const std::string tag(p.name);
    out.push_back({"fig3-incoherent-" + tag, "averaged-intensity map, traps " + tag,
                   {{"model", "MESH_INCOHERENT"},
                    {"lattice", lattice_block(p, kMeshRates)},
                    {"mesh", fig3_mesh("off")},
                    {"analysis", json::array({{{"kind", "powerlaw"}, {"t_lo", 1000.0}, {"t_hi", 2000.0}}})}}});
  }
  out.push_back({"fig3-convergence-I", "mesh vs continuum discrepancy for beta in {0.8, 0.9, 0.95}*pi/2, traps I",
                 {{"model", "MESH_COHERENT"},
                  {"lattice", lattice_block(kPlacements[0], kMeshRates)},
                  {"mesh", fig3_mesh("off")},
                  {"analysis", json::array({{{"kind", "convergence"},
                                             {"betas", {0.8 * std::numbers::pi / 2, 0.9 * std::numbers::pi / 2,
                                                        0.95 * std::numbers::pi / 2}},
                                             {"steps", kFig3Steps}}})}}});
  out.push_back({"lightcone-qrw", "trap-free QRW front, J=1, Jt in [20, 200]",
                 {{"model", "QRW_CONTINUUM"},
                  {"lattice", {{"hopping", 1.0}, {"traps", json::array()}}},
                  {"sampling", {{"mode", "linear"}, {"t_start", 20.0}, {"t_end", 200.0}, {"count", 10}}},
                  {"analysis", json::array({{{"kind", "lightcone"}, {"threshold", 1e-6}}})}}});
  out.push_back({"lightcone-crw", "trap-free CRW front, J=1, Jt in [100, 1600]",
                 {{"model", "CRW_CONTINUUM"},
                  {"lattice", {{"hopping", 1.0}, {"traps", json::array()}}},
                  {"sampling", {{"mode", "linear"}, {"t_start", 100.0}, {"t_end", 1600.0}, {"count", 16}}},
                  {"analysis", json::array({{{"kind", "lightcone"}, {"threshold", 1e-6}}})}}});
  return out;
}

}  // namespace detail

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> registry = detail::build_presets();
  return registry;
}

inline const Preset* find_preset(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

// ------------------------------------------------------------- validation

namespace detail {

class Checker {
 public:
  std::vector<ConfigError> errors;

  void fail(std::string path, std::string message) { errors.push_back({std::move(path), std::move(message)}); }

  static std::string join(const std::string& parent, std::string_view key) {
    return parent.empty() ? std::string(key) : parent + "." + std::string(key);
  }

  bool object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(path, "expected an object");
    return false;
  }

  void only_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : obj.items()) {
      bool known = false;
      for (auto a : allowed) known = known || key == a;
      if (!known) fail(join(path, key), "unknown field");
    }
  }

  std::optional<double> number(const json& obj, std::string_view key, const std::string& path,
                               std::optional<double> fallback) {
    const std::string p = join(path, key);
    if (!obj.contains(key)) {
      if (!fallback) fail(p, "required field is missing");
      return fallback;
    }
    const json& v = obj.at(std::string(key));
    if (!v.is_number()) {
      fail(p, "expected a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      fail(p, "must be finite");
      return std::nullopt;
    }
    return d;
  }

  std::optional<long long> integer(const json& obj, std::string_view key, const std::string& path,
                                   std::optional<long long> fallback) {
    const std::string p = join(path, key);
    if (!obj.contains(key)) {
      if (!fallback) fail(p, "required field is missing");
      return fallback;
    }
    const json& v = obj.at(std::string(key));
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      fail(p, "integer out of range");
      return std::nullopt;
    }
    if (!v.is_number_integer()) {
      fail(p, "expected an integer");
      return std::nullopt;
    }
    return v.get<long long>();
  }

  std::optional<std::string> string(const json& obj, std::string_view key, const std::string& path,
                                    std::optional<std::string> fallback) {
    const std::string p = join(path, key);
    if (!obj.contains(key)) {
      if (!fallback) fail(p, "required field is missing");
      return fallback;
    }
    const json& v = obj.at(std::string(key));
    if (!v.is_string()) {
      fail(p, "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<bool> boolean(const json& obj, std::string_view key, const std::string& path, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(std::string(key));
    if (!v.is_boolean()) {
      fail(join(path, key), "expected true or false");
      return std::nullopt;
    }
    return v.get<bool>();
  }
};

inline bool beta_in_range(double b) { return b > 0.0 && b < std::numbers::pi / 2; }

inline void check_lattice(Checker& c, const json& root, ExperimentConfig& cfg) {
  if (!root.contains("lattice")) {
    c.fail("lattice", "required field is missing");
    return;
  }
  const json& lat = root.at("lattice");
  if (!c.object(lat, "lattice")) return;
  c.only_keys(lat, "lattice", {"hopping", "initial_site", "half_width", "traps"});

  if (auto j = c.number(lat, "hopping", "lattice", 1.0)) {
    if (*j > 0.0) {
      cfg.lattice.hopping = *j;
    } else {
      c.fail("lattice.hopping", "must be positive");
    }
  }
  if (auto n0 = c.integer(lat, "initial_site", "lattice", 0)) {
    if (std::llabs(*n0) <= kMaxHalfWidth) {
      cfg.lattice.initial_site = static_cast<int>(*n0);
    } else {
      c.fail("lattice.initial_site", "out of range");
    }
  }
  if (auto hw = c.integer(lat, "half_width", "lattice", 0)) {
    if (*hw >= 0 && *hw <= kMaxHalfWidth) {
      cfg.lattice.half_width = static_cast<int>(*hw);
    } else {
      c.fail("lattice.half_width", "must lie in [0, " + std::to_string(kMaxHalfWidth) + "] (0 = automatic)");
    }
  }
  cfg.lattice.traps.clear();
  if (lat.contains("traps")) {
    const json& traps = lat.at("traps");
    if (!traps.is_array()) {
      c.fail("lattice.traps", "expected an array of {site, rate}");
    } else {
      for (std::size_t i = 0; i < traps.size(); ++i) {
        const std::string p = "lattice.traps[" + std::to_string(i) + "]";
        if (!c.object(traps[i], p)) continue;
        c.only_keys(traps[i], p, {"site", "rate"});
        const auto site = c.integer(traps[i], "site", p, std::nullopt);
        const auto rate = c.number(traps[i], "rate", p, std::nullopt);
        if (site && std::llabs(*site) > kMaxHalfWidth) {
          c.fail(p + ".site", "out of range");
          continue;
        }
        if (rate && *rate < 0.0) {
          c.fail(p + ".rate", "trap rate must be nonnegative, got " + json(*rate).dump());
          continue;
        }
        if (!site || !rate) continue;
        if (!cfg.lattice.traps.emplace(static_cast<int>(*site), *rate).second) {
          c.fail(p + ".site", "duplicate trap site " + std::to_string(*site));
        }
      }
    }
  }
  if (cfg.lattice.half_width > 0) {
    if (std::abs(cfg.lattice.initial_site) > cfg.lattice.half_width) {
      c.fail("lattice.initial_site", "lies outside the fixed grid");
    }
    for (const auto& [site, rate] : cfg.lattice.traps) {
      if (std::abs(site) > cfg.lattice.half_width) {
        c.fail("lattice.traps", "trap site " + std::to_string(site) + " lies outside the fixed grid");
      }
    }
  }
}

inline void check_mesh(Checker& c, const json& root, ExperimentConfig& cfg) {
  const bool mesh_model = is_mesh_model(cfg.model);
  if (!root.contains("mesh")) {
    if (mesh_model) c.fail("mesh", "required for " + std::string(to_string(cfg.model)));
    return;
  }
  if (!mesh_model) {
    c.fail("mesh", "only valid for MESH_* models");
    return;
  }
  const json& m = root.at("mesh");
  if (!c.object(m, "mesh")) return;
  c.only_keys(m, "mesh", {"beta", "phase_mode", "steps", "seed", "realizations", "overlay_incoherent"});
  MeshConfig mesh;
  const bool dephased = cfg.model == ModelTag::MeshDephasedSingle || cfg.model == ModelTag::MeshDephasedEnsemble;
  const bool ensemble = cfg.model == ModelTag::MeshDephasedEnsemble;

  if (auto b = c.number(m, "beta", "mesh", std::nullopt)) {
    if (beta_in_range(*b)) {
      mesh.beta = *b;
    } else {
      c.fail("mesh.beta", "must lie in (0, pi/2), got " + json(*b).dump());
    }
  }
  const std::string expected_mode(to_string(dephased ? PhaseMode::UniformRandom : PhaseMode::Off));
  if (auto pm = c.string(m, "phase_mode", "mesh", expected_mode)) {
    if (*pm != "off" && *pm != "uniform_random") {
      c.fail("mesh.phase_mode", "expected \"off\" or \"uniform_random\"");
    } else if (*pm != expected_mode) {
      c.fail("mesh.phase_mode", std::string(to_string(cfg.model)) + " requires \"" + expected_mode + "\"");
    } else {
      mesh.phase_mode = dephased ? PhaseMode::UniformRandom : PhaseMode::Off;
    }
  }
  if (auto steps = c.integer(m, "steps", "mesh", std::nullopt)) {
    if (*steps >= 1 && *steps <= kMaxMeshSteps) {
      mesh.steps = static_cast<long>(*steps);
    } else {
      c.fail("mesh.steps", "must lie in [1, " + std::to_string(kMaxMeshSteps) + "]");
    }
  }
  if (m.contains("seed")) {
    const json& s = m.at("seed");
    if (s.is_number_unsigned()) {
      mesh.seed = s.get<std::uint64_t>();
    } else if (s.is_number_integer() && s.get<long long>() >= 0) {
      mesh.seed = static_cast<std::uint64_t>(s.get<long long>());
    } else {
      c.fail("mesh.seed", "expected an unsigned 64-bit integer");
    }
  }
  if (auto r = c.integer(m, "realizations", "mesh", ensemble ? 1000 : 1)) {
    if (*r < 1 || static_cast<std::size_t>(*r) > kMaxRealizations) {
      c.fail("mesh.realizations", "must lie in [1, " + std::to_string(kMaxRealizations) + "]");
    } else if (!ensemble && *r != 1) {
      c.fail("mesh.realizations", "only MESH_DEPHASED_ENSEMBLE takes more than one realization");
    } else {
      mesh.realizations = static_cast<std::size_t>(*r);
    }
  }
  if (auto o = c.boolean(m, "overlay_incoherent", "mesh", ensemble)) {
    if (*o && !ensemble) {
      c.fail("mesh.overlay_incoherent", "only valid for MESH_DEPHASED_ENSEMBLE");
    } else {
      mesh.overlay_incoherent = *o;
    }
  }
  cfg.mesh = mesh;
}

inline void check_sampling(Checker& c, const json& root, ExperimentConfig& cfg) {
  const bool mesh_model = is_mesh_model(cfg.model);
  if (!root.contains("sampling")) {
    if (mesh_model) {
      cfg.sampling = {SamplingMode::PerStep};
    } else {
      c.fail("sampling", "required for continuum models");
    }
    return;
  }
  const json& s = root.at("sampling");
  if (!c.object(s, "sampling")) return;
  const auto mode = c.string(s, "mode", "sampling", mesh_model ? "per_step" : "linear");
  if (!mode) return;
  SamplingConfig out;
  if (*mode == "per_step") {
    c.only_keys(s, "sampling", {"mode"});
    if (!mesh_model) c.fail("sampling.mode", "per_step sampling is only valid for MESH_* models");
    out.mode = SamplingMode::PerStep;
    cfg.sampling = out;
    return;
  }
  if (mesh_model) {
    c.fail("sampling.mode", "mesh models record every step; use \"per_step\"");
    return;
  }
  if (*mode == "explicit") {
    c.only_keys(s, "sampling", {"mode", "times"});
    out.mode = SamplingMode::Explicit;
    if (!s.contains("times") || !s.at("times").is_array() || s.at("times").empty()) {
      c.fail("sampling.times", "explicit sampling needs a nonempty array of times");
      return;
    }
    const json& times = s.at("times");
    if (static_cast<long>(times.size()) > kMaxSamples) {
      c.fail("sampling.times", "too many sample times");
      return;
    }
    double prev = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const std::string p = "sampling.times[" + std::to_string(i) + "]";
      if (!times[i].is_number() || !std::isfinite(times[i].get<double>())) {
        c.fail(p, "expected a finite number");
        return;
      }
      const double t = times[i].get<double>();
      if (!(t > prev)) {
        c.fail(p, "sample times must be positive and strictly increasing");
        return;
      }
      out.times.push_back(t);
      prev = t;
    }
    out.t_end = out.times.back();
    out.t_start = out.times.front();
    out.count = static_cast<long>(out.times.size());
    cfg.sampling = out;
    return;
  }
  if (*mode != "log" && *mode != "linear") {
    c.fail("sampling.mode", "expected one of log, linear, explicit, per_step");
    return;
  }
  c.only_keys(s, "sampling", {"mode", "t_start", "t_end", "count"});
  out.mode = *mode == "log" ? SamplingMode::Log : SamplingMode::Linear;
  const auto count = c.integer(s, "count", "sampling", 100);
  const auto t_end = c.number(s, "t_end", "sampling", std::nullopt);
  if (count && (*count < 2 || *count > kMaxSamples)) {
    c.fail("sampling.count", "must lie in [2, " + std::to_string(kMaxSamples) + "]");
    return;
  }
  if (t_end && !(*t_end > 0.0)) {
    c.fail("sampling.t_end", "must be positive");
    return;
  }
  if (!count || !t_end) return;
  const double fallback_start = out.mode == SamplingMode::Log ? *t_end / 1000.0 : *t_end / double(*count);
  const auto t_start = c.number(s, "t_start", "sampling", fallback_start);
  if (!t_start) return;
  if (!(*t_start > 0.0 && *t_start < *t_end)) {
    c.fail("sampling.t_start", "must satisfy 0 < t_start < t_end");
    return;
  }
  out.t_start = *t_start;
  out.t_end = *t_end;
  out.count = static_cast<long>(*count);
  cfg.sampling = out;
}

inline void check_analysis(Checker& c, const json& root, ExperimentConfig& cfg) {
  cfg.analysis.clear();
  if (!root.contains("analysis")) return;
  const json& list = root.at("analysis");
  if (!list.is_array()) {
    c.fail("analysis", "expected an array");
    return;
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string p = "analysis[" + std::to_string(i) + "]";
    if (!c.object(list[i], p)) continue;
    const auto kind = c.string(list[i], "kind", p, std::nullopt);
    if (!kind) continue;
    const json& a = list[i];
    AnalysisRequest req;
    if (*kind == "powerlaw") {
      req.kind = AnalysisKind::Powerlaw;
      c.only_keys(a, p, {"kind", "t_lo", "t_hi"});
      if (a.contains("t_lo") != a.contains("t_hi")) {
        c.fail(p, "give both t_lo and t_hi or neither");
        continue;
      }
      if (a.contains("t_lo")) {
        const auto lo = c.number(a, "t_lo", p, std::nullopt);
        const auto hi = c.number(a, "t_hi", p, std::nullopt);
        if (!lo || !hi) continue;
        if (!(*lo > 0.0 && *lo < *hi)) {
          c.fail(p + ".t_lo", "fit window must satisfy 0 < t_lo < t_hi");
          continue;
        }
        req.window = FitWindow{*lo, *hi};
      }
    } else if (*kind == "plateau") {
      req.kind = AnalysisKind::Plateau;
      c.only_keys(a, p, {"kind", "window_fraction"});
      const auto f = c.number(a, "window_fraction", p, 0.1);
      if (!f) continue;
      if (!(*f > 0.0 && *f <= 0.5)) {
        c.fail(p + ".window_fraction", "must lie in (0, 0.5]");
        continue;
      }
      req.window_fraction = *f;
    } else if (*kind == "lightcone") {
      req.kind = AnalysisKind::Lightcone;
      c.only_keys(a, p, {"kind", "threshold"});
      if (cfg.model == ModelTag::MeshDephasedEnsemble) {
        c.fail(p + ".kind", "ensemble runs keep no snapshots; lightcone is unavailable");
        continue;
      }
      const auto th = c.number(a, "threshold", p, 1e-6);
      if (!th) continue;
      if (!(*th > 0.0 && *th < 1.0)) {
        c.fail(p + ".threshold", "must lie in (0, 1)");
        continue;
      }
      req.threshold = *th;
    } else if (*kind == "convergence") {
      req.kind = AnalysisKind::Convergence;
      c.only_keys(a, p, {"kind", "betas", "steps"});
      if (!is_mesh_model(cfg.model)) {
        c.fail(p + ".kind", "convergence scans need a MESH_* model (trap rates are per-step losses)");
        continue;
      }
      if (!a.contains("betas") || !a.at("betas").is_array() || a.at("betas").empty()) {
        c.fail(p + ".betas", "expected a nonempty array of coupling angles");
        continue;
      }
      bool ok = true;
      for (std::size_t k = 0; k < a.at("betas").size(); ++k) {
        const json& b = a.at("betas")[k];
        if (!b.is_number() || !beta_in_range(b.get<double>())) {
          c.fail(p + ".betas[" + std::to_string(k) + "]", "must lie in (0, pi/2)");
          ok = false;
          continue;
        }
        req.betas.push_back(b.get<double>());
      }
      const long fallback = cfg.mesh ? cfg.mesh->steps : 0;
      const auto steps = c.integer(a, "steps", p, fallback > 0 ? std::optional<long long>(fallback) : std::nullopt);
      if (!steps || !ok) continue;
      if (*steps < 1 || *steps > kMaxMeshSteps) {
        c.fail(p + ".steps", "must lie in [1, " + std::to_string(kMaxMeshSteps) + "]");
        continue;
      }
      req.steps = static_cast<long>(*steps);
    } else {
      c.fail(p + ".kind", "expected one of powerlaw, plateau, lightcone, convergence");
      continue;
    }
    cfg.analysis.push_back(req);
  }
}

inline void check_output(Checker& c, const json& root, ExperimentConfig& cfg) {
  cfg.output = OutputConfig{};
  cfg.output.dir = default_output_dir();
  if (!root.contains("output")) return;
  const json& o = root.at("output");
  if (!c.object(o, "output")) return;
  c.only_keys(o, "output", {"dir", "formats", "snapshots", "snapshot_stride"});
  if (auto dir = c.string(o, "dir", "output", cfg.output.dir)) {
    if (dir->empty()) {
      c.fail("output.dir", "must not be empty");
    } else {
      cfg.output.dir = *dir;
    }
  }
  if (o.contains("formats")) {
    const json& f = o.at("formats");
    if (!f.is_array()) {
      c.fail("output.formats", "expected an array drawn from csv, json, svg");
    } else {
      std::vector<std::string> formats;
      for (std::size_t i = 0; i < f.size(); ++i) {
        const std::string p = "output.formats[" + std::to_string(i) + "]";
        if (!f[i].is_string()) {
          c.fail(p, "expected a string");
          continue;
        }
        const auto name = f[i].get<std::string>();
        if (name != "csv" && name != "json" && name != "svg") {
          c.fail(p, "unknown format \"" + name + "\" (csv, json, svg)");
          continue;
        }
        if (std::find(formats.begin(), formats.end(), name) == formats.end()) formats.push_back(name);
      }
      cfg.output.formats = formats;
    }
  }
  if (auto snaps = c.boolean(o, "snapshots", "output", false)) {
    if (*snaps && cfg.model == ModelTag::MeshDephasedEnsemble) {
      c.fail("output.snapshots", "ensemble runs keep no snapshots");
    } else {
      cfg.output.snapshots = *snaps;
    }
  }
  if (auto stride = c.integer(o, "snapshot_stride", "output", 1)) {
    if (*stride >= 1 && *stride <= kMaxMeshSteps) {
      cfg.output.snapshot_stride = static_cast<long>(*stride);
    } else {
      c.fail("output.snapshot_stride", "must be at least 1");
    }
  }
}

}  // namespace detail

/// Replaces a `preset` reference by the preset document with the rest of
/// `raw` merged over it (RFC 7396 merge patch). Documents without a preset
/// pass through unchanged.
inline json expand_preset(const json& raw, std::vector<ConfigError>& errors) {
  if (!raw.is_object() || !raw.contains("preset")) return raw;
  const json& name = raw.at("preset");
  if (!name.is_string()) {
    errors.push_back({"preset", "expected a preset name"});
    return raw;
  }
  const Preset* preset = find_preset(name.get<std::string>());
  if (!preset) {
    errors.push_back({"preset", "unknown preset \"" + name.get<std::string>() + "\" (see list-presets)"});
    return raw;
  }
  json out = preset->document;
  out.merge_patch(raw);
  return out;
}

struct ValidationResult {
  std::optional<ExperimentConfig> config;
  std::vector<ConfigError> errors;

  bool ok() const { return config.has_value(); }
};

/// Full schema check with aggregated, path-qualified diagnostics. Defaults
/// are filled in; to_json of the result re-validates to the same config.
inline ValidationResult validate_config(const json& raw) {
  ValidationResult result;
  if (!raw.is_object()) {
    result.errors.push_back({"", "expected a JSON object"});
    return result;
  }
  json doc = expand_preset(raw, result.errors);
  if (!result.errors.empty()) return result;

  detail::Checker c;
  c.only_keys(doc, "", {"preset", "model", "lattice", "mesh", "sampling", "analysis", "output"});
  ExperimentConfig cfg;
  if (doc.contains("preset")) cfg.preset = doc.at("preset").get<std::string>();

  bool model_ok = false;
  if (auto model = c.string(doc, "model", "", std::nullopt)) {
    if (auto tag = parse_model_tag(*model)) {
      cfg.model = *tag;
      model_ok = true;
    } else {
      std::string names;
      for (ModelTag t : kAllModels) names += (names.empty() ? "" : ", ") + std::string(to_string(t));
      c.fail("model", "unknown model \"" + *model + "\" (" + names + ")");
    }
  }
  detail::check_lattice(c, doc, cfg);
  if (model_ok) {
    detail::check_mesh(c, doc, cfg);
    detail::check_sampling(c, doc, cfg);
    detail::check_analysis(c, doc, cfg);
    detail::check_output(c, doc, cfg);
  }
  if (!c.errors.empty()) {
    result.errors = std::move(c.errors);
    return result;
  }
  result.config = std::move(cfg);
  return result;
}

inline ValidationResult validate_config_text(std::string_view text) {
  json raw = json::parse(text, nullptr, false);
  if (raw.is_discarded()) return {std::nullopt, {{"", "not a valid JSON document"}}};
  return validate_config(raw);
}

inline ExperimentConfig require_valid(const json& raw) {
  auto r = validate_config(raw);
  if (!r.ok()) throw ConfigInvalid(std::move(r.errors));
  return std::move(*r.config);
}

/// Fully explicit JSON form of a validated config.
inline json to_json(const ExperimentConfig& cfg) {
  json out;
  if (!cfg.preset.empty()) out["preset"] = cfg.preset;
  out["model"] = to_string(cfg.model);
  json traps = json::array();
  for (const auto& [site, rate] : cfg.lattice.traps) traps.push_back({{"site", site}, {"rate", rate}});
  out["lattice"] = {{"hopping", cfg.lattice.hopping},
                    {"initial_site", cfg.lattice.initial_site},
                    {"half_width", cfg.lattice.half_width},
                    {"traps", traps}};
  if (cfg.mesh) {
    out["mesh"] = {{"beta", cfg.mesh->beta},
                   {"phase_mode", to_string(cfg.mesh->phase_mode)},
                   {"steps", cfg.mesh->steps},
                   {"seed", cfg.mesh->seed},
                   {"realizations", cfg.mesh->realizations},
                   {"overlay_incoherent", cfg.mesh->overlay_incoherent}};
  }
  json sampling = {{"mode", to_string(cfg.sampling.mode)}};
  if (cfg.sampling.mode == SamplingMode::Explicit) {
    sampling["times"] = cfg.sampling.times;
  } else if (cfg.sampling.mode != SamplingMode::PerStep) {
    sampling["t_start"] = cfg.sampling.t_start;
    sampling["t_end"] = cfg.sampling.t_end;
    sampling["count"] = cfg.sampling.count;
  }
  out["sampling"] = sampling;
  json analysis = json::array();
  for (const auto& a : cfg.analysis) {
    json item = {{"kind", to_string(a.kind)}};
    switch (a.kind) {
      case AnalysisKind::Powerlaw:
        if (a.window) {
          item["t_lo"] = a.window->t_lo;
          item["t_hi"] = a.window->t_hi;
        }
        break;
      case AnalysisKind::Plateau: item["window_fraction"] = a.window_fraction; break;
      case AnalysisKind::Lightcone: item["threshold"] = a.threshold; break;
      case AnalysisKind::Convergence:
        item["betas"] = a.betas;
        item["steps"] = a.steps;
        break;
    }
    analysis.push_back(item);
  }
  out["analysis"] = analysis;
  out["output"] = {{"dir", cfg.output.dir},
                   {"formats", cfg.output.formats},
                   {"snapshots", cfg.output.snapshots},
                   {"snapshot_stride", cfg.output.snapshot_stride}};
  return out;
}

/// Sample times of a continuum run (empty for per-step sampling).
inline std::vector<double> sample_times(const SamplingConfig& s) {
  std::vector<double> out;
  switch (s.mode) {
    case SamplingMode::PerStep: break;
    case SamplingMode::Explicit: out = s.times; break;
    case SamplingMode::Linear:
      for (long k = 0; k < s.count; ++k) {
        out.push_back(k + 1 == s.count ? s.t_end : s.t_start + (s.t_end - s.t_start) * double(k) / double(s.count - 1));
      }
      break;
    case SamplingMode::Log: {
      const double ratio = std::log(s.t_end / s.t_start);
      for (long k = 0; k < s.count; ++k) {
        out.push_back(k + 1 == s.count ? s.t_end : s.t_start * std::exp(ratio * double(k) / double(s.count - 1)));
      }
      break;
    }
  }
  return out;
}

/// Horizon of the run: t_end for continuum models, the step count for mesh.
inline double horizon(const ExperimentConfig& cfg) {
  return cfg.mesh ? static_cast<double>(cfg.mesh->steps) : cfg.sampling.t_end;
}

/// Mesh run parameters; the grid is sized for the model unless fixed.
inline MeshSpec mesh_spec(const ExperimentConfig& cfg) {
  if (!cfg.mesh) throw InvalidSpec("config has no mesh block");
  MeshSpec spec;
  spec.base = cfg.lattice;
  spec.beta = cfg.mesh->beta;
  spec.phase_mode = cfg.mesh->phase_mode;
  spec.seed = cfg.mesh->seed;
  spec.steps = cfg.mesh->steps;
  if (spec.base.half_width == 0) spec = make_mesh_grid(spec, cfg.model);
  validate(spec);
  return spec;
}

/// Continuum grid; automatic unless half_width was fixed.
inline LatticeSpec continuum_lattice(const ExperimentConfig& cfg) {
  if (cfg.lattice.half_width == 0) return make_grid(cfg.lattice, cfg.sampling.t_end, cfg.model);
  validate(cfg.lattice);
  return cfg.lattice;
}

}  // namespace trapwalk
