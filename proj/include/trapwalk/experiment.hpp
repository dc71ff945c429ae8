#pragma once

// Runs a validated ExperimentConfig end to end and writes its files:
// survival.csv, snapshots.csv, summary.json and survival.svg.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "trapwalk/analysis.hpp"
#include "trapwalk/config.hpp"
#include "trapwalk/crw.hpp"
#include "trapwalk/mesh.hpp"
#include "trapwalk/qrw.hpp"
#include "trapwalk/svg.hpp"

namespace trapwalk {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitConfig = 2,
  kExitTruncation = 3,
  kExitNumerical = 4,
};

/// Hex SHA-1 of the git blob object holding `content` (what `git hash-object` prints).
inline std::string git_blob_digest(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("EVP_MD_CTX_new failed");
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Two-column CSV, 17 significant digits, newline-terminated rows.
inline std::string series_csv(std::string_view header, std::span<const double> x, std::span<const double> y) {
  std::string out(header);
  out += '\n';
  for (std::size_t k = 0; k < x.size(); ++k) {
    out += format_number(x[k]);
    out += ',';
    out += format_number(y[k]);
    out += '\n';
  }
  return out;
}

inline std::string snapshots_csv(std::span<const Snapshot> snaps, long stride, int half_width) {
  std::string out = "time,site,value\n";
  const auto step = static_cast<std::size_t>(std::max(1L, stride));
  for (std::size_t k = 0; k < snaps.size(); k += step) {
    const auto t = format_number(snaps[k].time);
    for (std::size_t j = 0; j < snaps[k].occupancy.size(); ++j) {
      out += t;
      out += ',';
      out += std::to_string(static_cast<long long>(j) - half_width);
      out += ',';
      out += format_number(snaps[k].occupancy[j]);
      out += '\n';
    }
  }
  return out;
}

struct RunContext {
  unsigned threads = 0;          // ensemble workers; 0 = hardware concurrency
  std::ostream* log = nullptr;   // progress and diagnostics
};

struct ExperimentOutcome {
  int exit_code = kExitOk;
  std::string message;
  std::vector<std::filesystem::path> files;
  json summary;
};

namespace detail {

struct RawResult {
  SurvivalSeries series;
  std::vector<Snapshot> snapshots;
  int half_width = 0;
  std::optional<EnsembleResult> ensemble;
  std::optional<SurvivalSeries> overlay;
};

inline bool wants_lightcone(const ExperimentConfig& cfg) {
  for (const auto& a : cfg.analysis) {
    if (a.kind == AnalysisKind::Lightcone) return true;
  }
  return false;
}

inline RawResult simulate(const ExperimentConfig& cfg, const RunContext& ctx) {
  RawResult out;
  const bool keep_snapshots = cfg.output.snapshots || wants_lightcone(cfg);
  switch (cfg.model) {
    case ModelTag::CrwContinuum:
    case ModelTag::QrwContinuum: {
      const LatticeSpec lattice = continuum_lattice(cfg);
      const auto times = sample_times(cfg.sampling);
      const RunOptions options{.record_snapshots = keep_snapshots};
      if (cfg.model == ModelTag::CrwContinuum) {
        auto traj = run_crw(lattice, cfg.sampling.t_end, times, options);
        out.series = std::move(traj.series);
        out.snapshots = std::move(traj.snapshots);
      } else {
        auto traj = run_qrw(lattice, cfg.sampling.t_end, times, options);
        out.series = std::move(traj.series);
        out.snapshots = std::move(traj.snapshots);
      }
      out.half_width = lattice.half_width;
      break;
    }
    case ModelTag::MeshCoherent:
    case ModelTag::MeshDephasedSingle: {
      const MeshSpec spec = mesh_spec(cfg);
      MeshRunOptions options;
      options.record_snapshots = keep_snapshots;
      auto run = run_mesh(spec, options);
      out.series = std::move(run.series);
      out.snapshots = std::move(run.snapshots);
      out.half_width = spec.base.half_width;
      break;
    }
    case ModelTag::MeshIncoherent: {
      const MeshSpec spec = mesh_spec(cfg);
      MeshRunOptions options;
      options.record_snapshots = keep_snapshots;
      auto run = run_incoherent(spec, options);
      out.series = std::move(run.series);
      out.snapshots = std::move(run.snapshots);
      out.half_width = spec.base.half_width;
      break;
    }
    case ModelTag::MeshDephasedEnsemble: {
      const MeshSpec spec = mesh_spec(cfg);
      out.ensemble = run_mesh_ensemble(spec, cfg.mesh->realizations, ctx.threads);
      out.series = out.ensemble->series;
      if (cfg.mesh->overlay_incoherent) out.overlay = run_incoherent(spec).series;
      out.half_width = spec.base.half_width;
      break;
    }
  }
  return out;
}

inline json analyse(const ExperimentConfig& cfg, const RawResult& raw) {
  json results = json::array();
  for (const auto& a : cfg.analysis) {
    json item = {{"kind", to_string(a.kind)}};
    switch (a.kind) {
      case AnalysisKind::Powerlaw: {
        const auto fit = a.window ? fit_powerlaw_decay(raw.series, *a.window) : fit_powerlaw_decay(raw.series);
        item["t_lo"] = fit.fit_window.t_lo;
        item["t_hi"] = fit.fit_window.t_hi;
        item["exponent"] = fit.exponent;
        item["prefactor"] = fit.prefactor;
        item["residual_rms"] = fit.residual_rms;
        item["samples_used"] = fit.samples_used;
        break;
      }
      case AnalysisKind::Plateau: {
        const auto p = estimate_plateau(raw.series, a.window_fraction);
        item["window_fraction"] = p.window_fraction;
        item["value"] = p.value;
        item["spread"] = p.spread;
        item["relative_spread"] = p.value > 0.0 ? p.spread / p.value : 0.0;
        item["is_plateau"] = p.is_plateau();
        break;
      }
      case AnalysisKind::Lightcone: {
        item["threshold"] = a.threshold;
        item["speed"] = light_cone_speed(raw.snapshots, a.threshold, cfg.lattice.initial_site);
        item["snapshots_used"] = raw.snapshots.size();
        break;
      }
      case AnalysisKind::Convergence: {
        const auto rows = continuum_convergence_scan(cfg.lattice.traps, a.betas, a.steps, cfg.lattice.initial_site);
        json table = json::array();
        bool monotone = true;
        for (std::size_t k = 0; k < rows.size(); ++k) {
          table.push_back({{"beta", rows[k].beta},
                           {"qrw_discrepancy", rows[k].qrw_discrepancy},
                           {"crw_discrepancy", rows[k].crw_discrepancy}});
          if (k > 0) {
            monotone = monotone && rows[k].qrw_discrepancy < rows[k - 1].qrw_discrepancy &&
                       rows[k].crw_discrepancy < rows[k - 1].crw_discrepancy;
          }
        }
        item["steps"] = a.steps;
        item["rows"] = table;
        item["monotone_in_listed_order"] = monotone;
        break;
      }
    }
    results.push_back(item);
  }
  return results;
}

inline constexpr double kRoundoffFloor = 1e-12;

/// Largest |ensemble mean - overlay| in units of the standard error.
inline json ensemble_summary(const EnsembleResult& e, const SurvivalSeries* overlay, std::size_t realizations) {
  json out;
  bool monotone = true;
  for (std::size_t k = 1; k < e.series.samples.size(); ++k) {
    monotone = monotone && e.series.samples[k].survival <= e.series.samples[k - 1].survival;
  }
  out["realizations"] = realizations;
  out["monotone"] = monotone;
  if (overlay) {
    double worst_z = 0.0, worst_abs = 0.0;
    bool within = true;
    const double root_r = std::sqrt(static_cast<double>(realizations));
    for (std::size_t k = 0; k < e.series.samples.size(); ++k) {
      const double diff = std::abs(e.series.samples[k].survival - overlay->samples[k].survival);
      const double se = e.std_dev[k] / root_r;
      worst_abs = std::max(worst_abs, diff);
      // differences at roundoff level are not counted against the error bar
      const double excess = std::max(0.0, diff - kRoundoffFloor);
      if (se > 0.0) worst_z = std::max(worst_z, excess / se);
      within = within && diff <= 5.0 * se + kRoundoffFloor;
    }
    out["overlay_max_abs_difference"] = worst_abs;
    out["overlay_max_standard_errors"] = worst_z;
    out["overlay_within_5_standard_errors"] = within;
  }
  return out;
}

inline std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                        const std::string& content) {
  const auto path = dir / name;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::filesystem::filesystem_error("cannot open for writing", path, std::make_error_code(std::errc::io_error));
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::filesystem::filesystem_error("write failed", path, std::make_error_code(std::errc::io_error));
  return path;
}

}  // namespace detail

/// Executes the model and analyses, writes the requested files and returns
/// the exit status: 0 ok, 2 config, 3 truncation, 4 numerical, 1 I/O.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunContext& ctx = {}) {
  ExperimentOutcome outcome;
  auto fail = [&](int code, const std::string& what) {
    outcome.exit_code = code;
    outcome.message = what;
    if (ctx.log) *ctx.log << "error: " << what << "\n";
    return outcome;
  };
  if (auto check = validate_config(to_json(cfg)); !check.ok()) return fail(kExitConfig, format_errors(check.errors));

  detail::RawResult raw;
  json analysis;
  try {
    if (ctx.log) *ctx.log << "running " << to_string(cfg.model) << (cfg.preset.empty() ? "" : " (" + cfg.preset + ")") << "\n";
    raw = detail::simulate(cfg, ctx);
    analysis = detail::analyse(cfg, raw);
  } catch (const TruncationError& e) {
    return fail(kExitTruncation, e.what());
  } catch (const NumericalError& e) {
    return fail(kExitNumerical, e.what());
  } catch (const InvalidSpec& e) {
    return fail(kExitConfig, e.what());
  }

  const json config_json = to_json(cfg);
  json summary;
  summary["trapwalk_version"] = kVersion;
  summary["config"] = config_json;
  summary["config_digest"] = git_blob_digest(config_json.dump());
  summary["model"] = to_string(cfg.model);
  summary["seed"] = cfg.mesh && cfg.mesh->phase_mode == PhaseMode::UniformRandom ? json(cfg.mesh->seed) : json(nullptr);
  summary["grid"] = {{"half_width", raw.half_width}, {"sites", 2 * raw.half_width + 1}};
  summary["samples"] = raw.series.samples.size();
  if (!raw.series.samples.empty()) {
    summary["final_time"] = raw.series.samples.back().time;
    summary["final_survival"] = raw.series.samples.back().survival;
  }
  summary["analysis"] = analysis;
  if (raw.ensemble) {
    summary["ensemble"] =
        detail::ensemble_summary(*raw.ensemble, raw.overlay ? &*raw.overlay : nullptr, cfg.mesh->realizations);
  }

  try {
    const std::filesystem::path dir(cfg.output.dir);
    std::filesystem::create_directories(dir);
    json files = json::object();
    auto emit = [&](const std::string& name, const std::string& content) {
      outcome.files.push_back(detail::write_file(dir, name, content));
      files[name] = {{"digest", git_blob_digest(content)}, {"bytes", content.size()}};
    };
    const auto times = raw.series.times();
    const auto values = raw.series.values();
    if (cfg.output.has("csv")) {
      emit("survival.csv", series_csv("time,survival", times, values));
      if (raw.ensemble) emit("survival_std.csv", series_csv("time,std_dev", times, raw.ensemble->std_dev));
      if (raw.overlay) emit("incoherent.csv", series_csv("time,survival", raw.overlay->times(), raw.overlay->values()));
      if (cfg.output.snapshots) {
        emit("snapshots.csv", snapshots_csv(raw.snapshots, cfg.output.snapshot_stride, raw.half_width));
      }
    }
    if (cfg.output.has("svg")) {
      std::vector<PlotSeries> plot{{std::string(to_string(cfg.model)), times, values}};
      if (raw.overlay) plot.push_back({"incoherent map", raw.overlay->times(), raw.overlay->values(), "#c0392b"});
      const bool decays = is_classical(cfg.model) || cfg.model == ModelTag::MeshDephasedEnsemble ||
                          cfg.model == ModelTag::MeshDephasedSingle;
      PlotOptions opt;
      opt.log_x = decays;
      opt.log_y = decays;
      opt.x_label = is_mesh_model(cfg.model) ? "step m" : "t";
      emit("survival.svg", render_svg(plot, opt));
    }
    summary["files"] = files;
    if (cfg.output.has("json")) {
      const auto path = dir / "summary.json";
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      f << summary.dump(2) << "\n";
      if (!f) return fail(kExitIo, "cannot write " + path.string());
      outcome.files.push_back(path);
    }
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kExitIo, e.what());
  }
  outcome.summary = std::move(summary);
  if (ctx.log) *ctx.log << "wrote " << outcome.files.size() << " files to " << cfg.output.dir << "\n";
  return outcome;
}

}  // namespace trapwalk
