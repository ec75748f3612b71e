// Measurement records and anchor layouts shared by the estimator, the
// simulator and the command-line tool.

#pragma once

#include <map>
#include <vector>

#include "rangeloc/lie.hpp"

namespace rangeloc {

using AnchorId = int;

struct RangeMeasurement {
  double t = 0.0;  ///< seconds
  AnchorId anchor = 0;
  double d = 0.0;  ///< metres
};

struct OrientationMeasurement {
  double t = 0.0;
  Mat3 R = Mat3::Identity();
};

struct Anchor {
  AnchorId id = 0;
  Vec3 p = Vec3::Zero();
};

/// Volume above which four points count as non-coplanar [m^3].
inline constexpr double kCoplanarVolume = 1e-3;

/// Largest tetrahedron volume spanned by any four of the points.
double best_tetrahedron_volume(const std::vector<Vec3>& points);

/// True when some four of the points span a volume above `tol`.
bool non_coplanar(const std::vector<Vec3>& points, double tol = kCoplanarVolume);

class AnchorSet {
 public:
  AnchorSet() = default;
  explicit AnchorSet(std::vector<Anchor> anchors);

  /// Throws ConfigError on duplicate ids.
  void add(const Anchor& a);

  const std::vector<Anchor>& anchors() const { return anchors_; }
  std::size_t size() const { return anchors_.size(); }
  bool empty() const { return anchors_.empty(); }
  bool contains(AnchorId id) const { return index_.count(id) != 0; }

  /// Throws StreamError for an unknown id.
  const Vec3& position(AnchorId id) const;

  /// Ids in ascending order (the round-robin order of the simulator).
  std::vector<AnchorId> ids() const;

  /// Axis-aligned bounding box of the anchor positions.
  void bounding_box(Vec3& lo, Vec3& hi) const;

  bool is_non_coplanar(double tol = kCoplanarVolume) const;

 private:
  std::vector<Anchor> anchors_;
  std::map<AnchorId, std::size_t> index_;
};

}  // namespace rangeloc
