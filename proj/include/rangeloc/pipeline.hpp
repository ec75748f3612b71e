// Online sliding-window estimator.
//
// Range-only mode keeps N translations; range-orientation mode keeps N poses
// whose rotations are seeded from the orientation sensor. Each accepted range
// measurement appends one state, drops the oldest one (which becomes the fixed
// previous estimate anchoring the window) and re-solves the window.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rangeloc/graph.hpp"
#include "rangeloc/measurements.hpp"
#include "rangeloc/solver.hpp"

namespace rangeloc {

enum class EstimatorMode { RangeOnly, RangeOrientation };

struct EstimatorConfig {
  std::size_t window = 10;  ///< N
  double v_max = 1.0;       ///< m/s
  double eta = 0.2;         ///< range noise bound [m]
  double f = 32.46;         ///< range sensor rate [Hz]
  double gamma = 3.0;       ///< outlier gate multiplier and restart threshold
  /// Separate overrides of the two roles of gamma.
  std::optional<double> gate_gamma;
  std::optional<double> max_rejections;
  double iota = 1.0;
  double xi = 1.0;
  double sigma_o = 0.01;  ///< orientation noise std [rad], sets the rotation weight
  LmConfig lm;
  /// Iteration cap of the bootstrap solve, which starts from a random guess.
  int bootstrap_iterations = 100;
  EstimatorMode mode = EstimatorMode::RangeOnly;
  std::uint64_t seed = 0;

  double gate_multiplier() const { return gate_gamma.value_or(gamma); }
  double restart_threshold() const { return max_rejections.value_or(gamma); }
  /// Throws ConfigError.
  void validate() const;
};

/// One state of the window together with the measurement that created it.
struct WindowEntry {
  double t = 0.0;
  RangeMeasurement range;
  Mat3 R_meas = Mat3::Identity();  ///< orientation reading (fused mode)
  Pose pose;                        ///< current estimate
};

struct Estimate {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  std::optional<Mat3> R;
};

enum class UpdateStatus {
  Buffering,        ///< fewer than N measurements so far
  Bootstrapped,     ///< first full-window solve
  Accepted,
  Rejected,
  RestartRequired,  ///< too many consecutive rejections; the window was cleared
};

const char* to_string(UpdateStatus s);

struct Update {
  UpdateStatus status = UpdateStatus::Buffering;
  std::optional<Estimate> estimate;
  std::optional<SolveReport> report;
  std::vector<std::string> warnings;
};

struct WindowSnapshot {
  std::vector<WindowEntry> entries;
  std::optional<WindowEntry> previous;  ///< t_hat_{k-N}
  int rejection_counter = 1;            ///< k_c
  bool bootstrapped = false;
  std::size_t num_factors = 0;          ///< factors in the last solved graph
};

/// Result of synchronize: the range stream with one orientation per sample.
struct SyncedMeasurement {
  RangeMeasurement range;
  OrientationMeasurement orientation;
};

/// Pairs every range sample with the orientation sample nearest in time;
/// ties go to the earlier sample. Throws ConfigError on an empty orientation
/// stream and StreamError on unordered input.
std::vector<SyncedMeasurement> synchronize(const std::vector<RangeMeasurement>& ranges,
                                           const std::vector<OrientationMeasurement>& orientations);

/// |(|t_hat - anchor| - d)| > gate * v_max / f
bool is_outlier(const Vec3& latest, const Vec3& anchor, double d, const EstimatorConfig& cfg);

class Estimator {
 public:
  Estimator(EstimatorConfig cfg, AnchorSet anchors);

  const EstimatorConfig& config() const { return cfg_; }
  const AnchorSet& anchors() const { return anchors_; }

  /// Range-only update. Throws StreamError on non-increasing timestamps or
  /// unknown anchors and ConfigError when the estimator is in fused mode.
  Update process_range(const RangeMeasurement& m);

  /// Range-orientation update with a synchronized orientation reading.
  Update process_range_orientation(const RangeMeasurement& m, const OrientationMeasurement& o);

  /// Outlier test against the latest estimate. Throws StreamError before
  /// the first estimate exists.
  bool is_outlier(const RangeMeasurement& m) const;

  bool bootstrapped() const { return bootstrapped_; }
  std::optional<Estimate> latest() const;
  WindowSnapshot snapshot() const;

  /// Graph, initial guess and report of the most recent window solve.
  const std::optional<FactorGraph>& last_graph() const { return last_graph_; }
  const Eigen::VectorXd& last_initial_state() const { return last_initial_; }
  const std::optional<SolveReport>& last_report() const { return last_report_; }

  /// Drops all window state and returns to bootstrap.
  void reset();

 private:
  Update process(const RangeMeasurement& m, const Mat3& R_meas);
  Update run_bootstrap();
  Update slide(const RangeMeasurement& m, const Mat3& R_meas);
  /// Rotations are expressed as R * frame.
  FactorGraph build_graph(EstimatorMode mode, const Mat3& frame = Mat3::Identity()) const;
  SolveReport solve(int max_iterations, EstimatorMode mode);
  Estimate estimate_of(const WindowEntry& e) const;

  EstimatorConfig cfg_;
  AnchorSet anchors_;
  std::mt19937_64 rng_;

  std::vector<WindowEntry> window_;
  std::optional<WindowEntry> previous_;
  bool bootstrapped_ = false;
  int k_c_ = 1;
  std::optional<double> last_t_;

  std::optional<FactorGraph> last_graph_;
  Eigen::VectorXd last_initial_;
  std::optional<SolveReport> last_report_;
};

}  // namespace rangeloc
