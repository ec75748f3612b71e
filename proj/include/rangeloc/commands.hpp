// Command implementations behind the rangeloc executable.

#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rangeloc/config.hpp"
#include "rangeloc/metrics.hpp"
#include "rangeloc/pipeline.hpp"
#include "rangeloc/stability.hpp"

namespace rangeloc {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitGeometry = 3,
  kExitRestart = 4,
  kExitParse = 5,
};

struct UpdateRecord {
  double t = 0.0;
  UpdateStatus status = UpdateStatus::Buffering;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double solve_seconds = 0.0;
};

struct LocalizationRun {
  std::vector<Estimate> estimates;
  std::vector<UpdateRecord> updates;
  std::vector<SolveReport> reports;  ///< one per window solve
  std::size_t rejections = 0;
  std::size_t restarts = 0;
  bool stopped_on_restart = false;
  std::vector<std::string> warnings;
};

struct RunOptions {
  /// Stop at the first restart-required update instead of re-bootstrapping.
  bool stop_on_restart = false;
  /// Called after every update with the index of the range measurement.
  std::function<void(const Estimator&, const Update&, std::size_t)> on_update;
};

/// Feeds a range stream (and, in fused mode, the synchronized orientation
/// stream) through an estimator.
LocalizationRun run_localization(const EstimatorConfig& cfg, const AnchorSet& anchors,
                                 const std::vector<RangeMeasurement>& ranges,
                                 const std::vector<OrientationMeasurement>& orientations = {},
                                 const RunOptions& options = {});

/// Throws InsufficientGeometry unless four anchors span a volume.
void require_geometry(const AnchorSet& anchors);

/// Resolved input / output locations: explicit paths win, otherwise files
/// named after their role inside paths.out.
std::string resolve_path(const RunConfig& cfg, const std::string& explicit_path, const std::string& name);

// Each command writes its outputs atomically into cfg.paths.out and returns
// an exit code. Configuration, parse and geometry problems are thrown as the
// matching exception types.
int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_localize(const RunConfig& cfg, std::ostream& log);
int cmd_evaluate(const RunConfig& cfg, std::ostream& log);
int cmd_diagnose(const RunConfig& cfg, std::ostream& log);
int cmd_bench(const RunConfig& cfg, std::ostream& log);

std::string format_metrics(const MetricsReport& m);
std::string format_stability(const StabilityReport& r);
StabilityReport parse_stability(const std::string& line);

}  // namespace rangeloc
