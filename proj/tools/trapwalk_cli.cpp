// trapwalk: run survival experiments from JSON configs or named presets.
//
//   trapwalk run --config cfg.json [--preset NAME] [--seed N] [--out-dir DIR]
//                [--realizations N] [--format csv,json,svg] [--threads N]
//   trapwalk list-presets
//   trapwalk validate --config cfg.json

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "trapwalk/config.hpp"
#include "trapwalk/experiment.hpp"

using namespace trapwalk;

namespace {

// Reads the config file; an empty path stands for an empty document.
bool load_document(const std::string& path, json& out) {
  if (path.empty()) {
    out = json::object();
    return true;
  }
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot read " << path << "\n";
    return false;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  out = json::parse(buf.str(), nullptr, false);
  if (out.is_discarded()) {
    std::cerr << "error: " << path << " is not valid JSON\n";
    return false;
  }
  return true;
}

std::vector<std::string> split_formats(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trapwalk: survival of classical and quantum walks on lattices with traps"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir, formats;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> realizations;
  unsigned threads = 0;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--preset", preset, "named preset (overrides the config's preset field)");
  run->add_option("--seed", seed, "master seed for dephased runs");
  run->add_option("--out-dir", out_dir, "output directory");
  run->add_option("--realizations", realizations, "ensemble size")->check(CLI::PositiveNumber);
  run->add_option("--format", formats, "comma-separated subset of csv,json,svg");
  run->add_option("--threads", threads, "ensemble worker threads (0 = all cores)");
  run->add_flag("-q,--quiet", quiet, "no progress output");

  auto* list = app.add_subcommand("list-presets", "print the preset registry");
  bool as_json = false;
  list->add_flag("--json", as_json, "print full preset documents");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config and print its resolved form");
  validate->add_option("--config", validate_path, "JSON config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (list->parsed()) {
    for (const auto& p : presets()) {
      if (as_json) {
        std::cout << json({{"name", p.name}, {"description", p.description}, {"document", p.document}}).dump()
                  << "\n";
      } else {
        std::cout << p.name << "  " << p.description << "\n";
      }
    }
    return kExitOk;
  }

  if (validate->parsed()) {
    json doc;
    if (!load_document(validate_path, doc)) return kExitConfig;
    const auto result = validate_config(doc);
    if (!result.ok()) {
      std::cerr << format_errors(result.errors);
      return kExitConfig;
    }
    std::cout << to_json(*result.config).dump(2) << "\n";
    return kExitOk;
  }

  if (config_path.empty() && preset.empty()) {
    std::cerr << "error: run needs --config or --preset\n";
    return kExitConfig;
  }
  json doc;
  if (!load_document(config_path, doc)) return kExitConfig;
  if (!doc.is_object()) {
    std::cerr << "<document>: expected a JSON object\n";
    return kExitConfig;
  }
  if (!preset.empty()) doc["preset"] = preset;
  // Command-line overrides go through validation like any other field.
  std::vector<ConfigError> errors;
  json expanded = expand_preset(doc, errors);
  if (!errors.empty()) {
    std::cerr << format_errors(errors);
    return kExitConfig;
  }
  if (seed) expanded["mesh"]["seed"] = *seed;
  if (realizations) expanded["mesh"]["realizations"] = *realizations;
  if (!out_dir.empty()) expanded["output"]["dir"] = out_dir;
  if (!formats.empty()) expanded["output"]["formats"] = split_formats(formats);

  const auto result = validate_config(expanded);
  if (!result.ok()) {
    std::cerr << format_errors(result.errors);
    return kExitConfig;
  }
  RunContext ctx;
  ctx.threads = threads;
  ctx.log = quiet ? nullptr : &std::cerr;
  const auto outcome = run_experiment(*result.config, ctx);
  if (outcome.exit_code != kExitOk && quiet) std::cerr << "error: " << outcome.message << "\n";
  return outcome.exit_code;
}
