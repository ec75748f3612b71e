// rangeloc: simulate, localize, evaluate, diagnose and bench from the command line.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rangeloc/commands.hpp"
#include "rangeloc/config.hpp"
#include "rangeloc/errors.hpp"

namespace {

struct Flags {
  std::string preset = "paper-indoor";
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  std::optional<std::size_t> window;
  std::optional<int> iters;
  std::string anchors, ranges, orientations, truth, estimates;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--preset", f.preset, "Named preset: paper-indoor, paper-outdoor, static-test")
      ->capture_default_str();
  cmd->add_option("--config", f.configs, "Config file of key = value lines (repeatable)");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--mode", f.mode, "range-only | fused");
  cmd->add_option("--window", f.window, "Window size N");
  cmd->add_option("--iters", f.iters, "Maximum LM iterations M");
  cmd->add_option("--anchors", f.anchors, "Anchor file");
  cmd->add_option("--ranges", f.ranges, "Range measurement file");
  cmd->add_option("--orientations", f.orientations, "Orientation measurement file");
  cmd->add_option("--truth", f.truth, "Ground-truth file");
  cmd->add_option("--estimates", f.estimates, "Estimate file");
  cmd->add_option("--set", f.overrides, "Override a config key: key=value (repeatable)");
}

rangeloc::RunConfig build_config(const Flags& f) {
  using rangeloc::ConfigError;
  rangeloc::RunConfig cfg = rangeloc::preset_config(f.preset);
  for (const auto& path : f.configs) rangeloc::apply_config_file(cfg, path);
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  if (f.out) cfg.set("paths.out", *f.out);
  if (f.mode) cfg.set("estimator.mode", *f.mode);
  if (f.window) cfg.set("estimator.window", std::to_string(*f.window));
  if (f.iters) cfg.set("lm.max_iterations", std::to_string(*f.iters));
  if (!f.anchors.empty()) cfg.set("paths.anchors", f.anchors);
  if (!f.ranges.empty()) cfg.set("paths.ranges", f.ranges);
  if (!f.orientations.empty()) cfg.set("paths.orientations", f.orientations);
  if (!f.truth.empty()) cfg.set("paths.truth", f.truth);
  if (!f.estimates.empty()) cfg.set("paths.estimates", f.estimates);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.finalize();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-based sliding-window localization"};
  app.require_subcommand(1);

  Flags flags;
  using Command = int (*)(const rangeloc::RunConfig&, std::ostream&);
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"simulate", {"Generate anchors, measurements and ground truth", rangeloc::cmd_simulate}},
      {"localize", {"Run the sliding-window estimator", rangeloc::cmd_localize}},
      {"evaluate", {"Compute E_T, E_RMSE, E_O and the error CDF", rangeloc::cmd_evaluate}},
      {"diagnose", {"Per-window stability diagnostics", rangeloc::cmd_diagnose}},
      {"bench", {"Time window solves against the real-time budget", rangeloc::cmd_bench}},
  };
  for (const auto& [name, info] : commands) add_common(app.add_subcommand(name, info.first), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? rangeloc::kExitOk : rangeloc::kExitConfig;
  }

  try {
    const rangeloc::RunConfig cfg = build_config(flags);
    for (const auto& [name, info] : commands) {
      if (app.got_subcommand(name)) return info.second(cfg, std::cout);
    }
  } catch (const rangeloc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rangeloc::kExitConfig;
  } catch (const rangeloc::InsufficientGeometry& e) {
    std::cerr << "insufficient geometry: " << e.what() << "\n";
    return rangeloc::kExitGeometry;
  } catch (const rangeloc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return rangeloc::kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rangeloc::kExitFailure;
  }
  return rangeloc::kExitFailure;
}
