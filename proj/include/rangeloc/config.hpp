// Run configuration: a flat `section.key = value` text format with named presets.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rangeloc/pipeline.hpp"
#include "rangeloc/sim.hpp"
#include "rangeloc/stability.hpp"

namespace rangeloc {

struct PathConfig {
  std::string anchors;
  std::string ranges;
  std::string orientations;
  std::string truth;
  std::string estimates;
  std::string out = ".";
};

struct BenchConfig {
  std::size_t problems = 200;  ///< window solves timed
};

struct RunConfig {
  EstimatorConfig estimator;
  TrajectorySpec trajectory;
  NoiseSpec noise;
  /// Simulated noise bound; follows estimator.eta unless set.
  std::optional<double> sim_eta;
  std::string anchor_preset = "paper-indoor";
  double imu_rate = kDefaultImuRate;
  std::uint64_t seed = 0;
  PathConfig paths;
  DiagnoseOptions stability;
  BenchConfig bench;

  /// Copies shared values (rates, v_max, eta, seed) into the sub-configs and
  /// validates everything. Throws ConfigError.
  void finalize();
  /// Every key accepted by set().
  static std::vector<std::string> keys();
  /// Throws ConfigError for unknown keys and malformed values.
  void set(const std::string& key, const std::string& value);
  /// Text form readable by load_config_file.
  std::string to_text() const;
};

/// "paper-indoor", "paper-outdoor" and "static-test".
RunConfig preset_config(const std::string& name);

/// Parses `key = value` lines; '#' starts a comment.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");
void apply_config_file(RunConfig& cfg, const std::string& path);

}  // namespace rangeloc
