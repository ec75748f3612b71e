// Ground-truth trajectories, anchor presets and bounded-noise sensor streams.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rangeloc/lie.hpp"
#include "rangeloc/measurements.hpp"

namespace rangeloc {

inline constexpr double kDefaultRangeRate = 32.46;  ///< Hz
inline constexpr double kDefaultImuRate = 100.3;    ///< Hz
inline constexpr double kDefaultEta = 0.2;          ///< m
inline constexpr double kDefaultVmax = 1.0;         ///< m/s

enum class TrajectoryShape { Circle, Rectangle, Helix, Waypoints };

TrajectoryShape parse_shape(const std::string& name);
const char* to_string(TrajectoryShape s);

struct TrajectorySpec {
  TrajectoryShape shape = TrajectoryShape::Circle;
  Vec3 center{0.0, 0.0, 1.2};
  double radius = 2.0;           ///< circle / helix
  double width = 4.0;            ///< rectangle extent along x
  double height = 3.0;           ///< rectangle extent along y
  double helix_amplitude = 0.5;  ///< vertical amplitude [m]
  double helix_period = 10.0;    ///< vertical period [s]
  std::vector<Vec3> waypoints;   ///< visited at constant speed; one point means static
  double speed = 0.5;            ///< path speed [m/s]
  double v_max = kDefaultVmax;
  double duration = 10.0;        ///< s
  double rate = kDefaultRangeRate; ///< truth sample rate [Hz]
  double tilt = 0.0;             ///< roll oscillation amplitude [rad]
  double tilt_period = 5.0;      ///< s

  /// Throws ConfigError for an invalid spec or a speed profile above v_max.
  void validate() const;
  /// Largest speed reached anywhere along the path.
  double peak_speed() const;
};

struct TruthSample {
  double t = 0.0;
  Pose pose;
};

/// Continuous-time trajectory. The body x axis follows the horizontal
/// velocity; a tilt adds a roll oscillation.
class Trajectory {
 public:
  explicit Trajectory(TrajectorySpec spec);

  const TrajectorySpec& spec() const { return spec_; }
  Vec3 position(double t) const;
  Vec3 velocity(double t) const;
  Mat3 rotation(double t) const;
  Pose pose(double t) const { return {rotation(t), position(t)}; }

  /// Samples at t = n / rate for all t < duration.
  std::vector<TruthSample> sample(double rate) const;

 private:
  TrajectorySpec spec_;
  std::vector<double> cumulative_;  // arc length at each waypoint
};

/// Samples the spec at its own rate.
std::vector<TruthSample> generate_truth(const TrajectorySpec& spec);

enum class RangeNoiseKind { TruncatedNormal, Uniform };

struct OutlierInterval {
  AnchorId anchor = 0;
  double start = 0.0;  ///< s, inclusive
  double end = 0.0;    ///< s, exclusive
  double bias = 1.0;   ///< m, added to the range
};

struct NoiseSpec {
  double eta = kDefaultEta;
  RangeNoiseKind kind = RangeNoiseKind::TruncatedNormal;
  double sigma_o = 0.0;  ///< orientation noise std per axis [rad]
  std::vector<OutlierInterval> outliers;

  void validate() const;
  /// Bias scheduled for this anchor and time (0 when none).
  double bias_at(AnchorId anchor, double t) const;
};

/// One range per truth sample; anchors are cycled in ascending id order.
/// Noise is N(0, (eta/3)^2) clipped to [-eta, eta], or uniform on that interval.
std::vector<RangeMeasurement> simulate_ranges(const std::vector<TruthSample>& truth,
                                              const AnchorSet& anchors, const NoiseSpec& noise,
                                              std::uint64_t seed);

/// Readings R * exp(n), n ~ N(0, sigma_o^2 I), at t = n / f_imu for t < duration.
std::vector<OrientationMeasurement> simulate_orientation(const Trajectory& trajectory, double f_imu,
                                                         const NoiseSpec& noise, std::uint64_t seed);

/// Named anchor layouts: "paper-indoor", "paper-outdoor", "static-test".
AnchorSet preset_anchors(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace rangeloc
