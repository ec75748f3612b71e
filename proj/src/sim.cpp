#include "rangeloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rangeloc/errors.hpp"

namespace rangeloc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat3 rot_z(double yaw) { return exp_so3(Vec3(0.0, 0.0, yaw)); }
Mat3 rot_x(double roll) { return exp_so3(Vec3(roll, 0.0, 0.0)); }

}  // namespace

TrajectoryShape parse_shape(const std::string& name) {
  if (name == "circle") return TrajectoryShape::Circle;
  if (name == "rectangle") return TrajectoryShape::Rectangle;
  if (name == "helix") return TrajectoryShape::Helix;
  if (name == "waypoints") return TrajectoryShape::Waypoints;
  throw ConfigError("unknown trajectory shape '" + name + "'");
}

const char* to_string(TrajectoryShape s) {
  switch (s) {
    case TrajectoryShape::Circle: return "circle";
    case TrajectoryShape::Rectangle: return "rectangle";
    case TrajectoryShape::Helix: return "helix";
    case TrajectoryShape::Waypoints: return "waypoints";
  }
  return "unknown";
}

double TrajectorySpec::peak_speed() const {
  switch (shape) {
    case TrajectoryShape::Helix: {
      const double vz = helix_amplitude * kTwoPi / helix_period;
      return std::hypot(speed, vz);
    }
    case TrajectoryShape::Waypoints:
      return waypoints.size() > 1 ? speed : 0.0;
    default:
      return speed;
  }
}

void TrajectorySpec::validate() const {
  if (!(speed >= 0.0)) throw ConfigError("sim.speed must be >= 0");
  if (!(v_max > 0.0)) throw ConfigError("sim.v_max must be > 0");
  if (!(duration >= 0.0)) throw ConfigError("sim.duration must be >= 0");
  if (!(rate > 0.0)) throw ConfigError("sim.rate must be > 0");
  if (!center.allFinite()) throw ConfigError("sim.center must be finite");
  switch (shape) {
    case TrajectoryShape::Circle:
      if (!(radius > 0.0)) throw ConfigError("sim.radius must be > 0");
      break;
    case TrajectoryShape::Helix:
      if (!(radius > 0.0)) throw ConfigError("sim.radius must be > 0");
      if (!(helix_period > 0.0)) throw ConfigError("sim.helix_period must be > 0");
      break;
    case TrajectoryShape::Rectangle:
      if (!(width > 0.0 && height > 0.0)) throw ConfigError("sim.width and sim.height must be > 0");
      break;
    case TrajectoryShape::Waypoints:
      if (waypoints.empty()) throw ConfigError("waypoint trajectory needs at least one waypoint");
      break;
  }
  if (tilt != 0.0 && !(tilt_period > 0.0)) throw ConfigError("sim.tilt_period must be > 0");
  if (peak_speed() > v_max * (1.0 + 1e-12)) {
    throw ConfigError("infeasible speed profile: peak speed " + std::to_string(peak_speed()) +
                      " m/s exceeds v_max " + std::to_string(v_max) + " m/s");
  }
}

Trajectory::Trajectory(TrajectorySpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.shape == TrajectoryShape::Waypoints) {
    cumulative_.push_back(0.0);
    for (std::size_t i = 1; i < spec_.waypoints.size(); ++i) {
      cumulative_.push_back(cumulative_.back() +
                            (spec_.waypoints[i] - spec_.waypoints[i - 1]).norm());
    }
  }
}

Vec3 Trajectory::position(double t) const {
  const auto& s = spec_;
  switch (s.shape) {
    case TrajectoryShape::Circle:
    case TrajectoryShape::Helix: {
      const double phi = s.speed / s.radius * t;
      Vec3 p = s.center + s.radius * Vec3(std::cos(phi), std::sin(phi), 0.0);
      if (s.shape == TrajectoryShape::Helix) {
        p.z() += s.helix_amplitude * std::sin(kTwoPi * t / s.helix_period);
      }
      return p;
    }
    case TrajectoryShape::Rectangle: {
      const double perimeter = 2.0 * (s.width + s.height);
      double arc = std::fmod(s.speed * t, perimeter);
      const Vec3 corner = s.center - 0.5 * Vec3(s.width, s.height, 0.0);
      if (arc < s.width) return corner + Vec3(arc, 0.0, 0.0);
      arc -= s.width;
      if (arc < s.height) return corner + Vec3(s.width, arc, 0.0);
      arc -= s.height;
      if (arc < s.width) return corner + Vec3(s.width - arc, s.height, 0.0);
      arc -= s.width;
      return corner + Vec3(0.0, s.height - arc, 0.0);
    }
    case TrajectoryShape::Waypoints: {
      if (s.waypoints.size() == 1) return s.waypoints.front();
      const double arc = s.speed * t;
      if (arc >= cumulative_.back()) return s.waypoints.back();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), arc);
      const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
      const double len = cumulative_[i + 1] - cumulative_[i];
      const double u = len > 0.0 ? (arc - cumulative_[i]) / len : 0.0;
      return s.waypoints[i] + u * (s.waypoints[i + 1] - s.waypoints[i]);
    }
  }
  return s.center;
}

Vec3 Trajectory::velocity(double t) const {
  const auto& s = spec_;
  switch (s.shape) {
    case TrajectoryShape::Circle:
    case TrajectoryShape::Helix: {
      const double phi = s.speed / s.radius * t;
      Vec3 v = s.speed * Vec3(-std::sin(phi), std::cos(phi), 0.0);
      if (s.shape == TrajectoryShape::Helix) {
        const double w = kTwoPi / s.helix_period;
        v.z() = s.helix_amplitude * w * std::cos(w * t);
      }
      return v;
    }
    case TrajectoryShape::Rectangle: {
      const double perimeter = 2.0 * (s.width + s.height);
      double arc = std::fmod(s.speed * t, perimeter);
      if (arc < s.width) return {s.speed, 0.0, 0.0};
      arc -= s.width;
      if (arc < s.height) return {0.0, s.speed, 0.0};
      arc -= s.height;
      if (arc < s.width) return {-s.speed, 0.0, 0.0};
      return {0.0, -s.speed, 0.0};
    }
    case TrajectoryShape::Waypoints: {
      if (s.waypoints.size() == 1) return Vec3::Zero();
      const double arc = s.speed * t;
      if (arc >= cumulative_.back()) return Vec3::Zero();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), arc);
      const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
      const Vec3 seg = s.waypoints[i + 1] - s.waypoints[i];
      const double len = seg.norm();
      return len > 0.0 ? Vec3(s.speed * seg / len) : Vec3::Zero();
    }
  }
  return Vec3::Zero();
}

Mat3 Trajectory::rotation(double t) const {
  const Vec3 v = velocity(t);
  double yaw = 0.0;
  if (std::hypot(v.x(), v.y()) > 1e-12) {
    yaw = std::atan2(v.y(), v.x());
  } else if (spec_.shape == TrajectoryShape::Waypoints && spec_.waypoints.size() > 1) {
    const Vec3 seg = spec_.waypoints.back() - spec_.waypoints[spec_.waypoints.size() - 2];
    if (std::hypot(seg.x(), seg.y()) > 1e-12) yaw = std::atan2(seg.y(), seg.x());
  }
  Mat3 R = rot_z(yaw);
  if (spec_.tilt != 0.0) R = R * rot_x(spec_.tilt * std::sin(kTwoPi * t / spec_.tilt_period));
  return R;
}

std::vector<TruthSample> Trajectory::sample(double rate) const {
  if (!(rate > 0.0)) throw ConfigError("sample rate must be > 0");
  std::vector<TruthSample> out;
  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) / rate;
    if (!(t < spec_.duration)) break;
    out.push_back({t, pose(t)});
  }
  return out;
}

std::vector<TruthSample> generate_truth(const TrajectorySpec& spec) {
  return Trajectory(spec).sample(spec.rate);
}

void NoiseSpec::validate() const {
  if (!(eta >= 0.0)) throw ConfigError("sim.eta must be >= 0");
  if (!(sigma_o >= 0.0)) throw ConfigError("sim.sigma_o must be >= 0");
  for (const auto& o : outliers) {
    if (!(o.end >= o.start)) throw ConfigError("outlier interval must have end >= start");
  }
}

double NoiseSpec::bias_at(AnchorId anchor, double t) const {
  double b = 0.0;
  for (const auto& o : outliers) {
    if (o.anchor == anchor && t >= o.start && t < o.end) b += o.bias;
  }
  return b;
}

std::vector<RangeMeasurement> simulate_ranges(const std::vector<TruthSample>& truth,
                                              const AnchorSet& anchors, const NoiseSpec& noise,
                                              std::uint64_t seed) {
  noise.validate();
  if (anchors.empty()) throw ConfigError("range simulation needs anchors");
  const std::vector<AnchorId> ids = anchors.ids();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::vector<RangeMeasurement> out;
  out.reserve(truth.size());
  for (std::size_t n = 0; n < truth.size(); ++n) {
    const AnchorId id = ids[n % ids.size()];
    const double dist = (truth[n].pose.t - anchors.position(id)).norm();
    double e = 0.0;
    if (noise.eta > 0.0) {
      if (noise.kind == RangeNoiseKind::Uniform) {
        e = noise.eta * unit(rng);
      } else {
        e = std::clamp(noise.eta / 3.0 * gauss(rng), -noise.eta, noise.eta);
      }
    }
    out.push_back({truth[n].t, id, dist + e + noise.bias_at(id, truth[n].t)});
  }
  return out;
}

std::vector<OrientationMeasurement> simulate_orientation(const Trajectory& trajectory, double f_imu,
                                                         const NoiseSpec& noise, std::uint64_t seed) {
  noise.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<OrientationMeasurement> out;
  for (const TruthSample& s : trajectory.sample(f_imu)) {
    Mat3 R = s.pose.R;
    if (noise.sigma_o > 0.0) {
      const Vec3 n(gauss(rng), gauss(rng), gauss(rng));
      R = R * exp_so3(noise.sigma_o * n);
    }
    out.push_back({s.t, R});
  }
  return out;
}

AnchorSet preset_anchors(const std::string& name) {
  if (name == "paper-indoor") {
    return AnchorSet({{0, {3.0, 3.0, 1.95}}, {1, {3.0, -3.0, 0.53}}, {2, {-3.0, 3.0, 0.54}},
                      {3, {-3.0, -3.0, 1.98}}});
  }
  if (name == "paper-outdoor") {
    return AnchorSet({{0, {0.0, 0.0, 0.79}}, {1, {6.0, 0.0, 5.0}}, {2, {6.0, 8.0, 1.52}},
                      {3, {0.0, 8.0, 5.52}}});
  }
  if (name == "static-test") {
    return AnchorSet({{0, {0.0, 0.0, 0.77}}, {1, {6.13, 0.0, 5.0}}, {2, {6.01, 8.07, 0.79}},
                      {3, {0.11, 8.02, 5.02}}});
  }
  throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"paper-indoor", "paper-outdoor", "static-test"}; }

}  // namespace rangeloc
