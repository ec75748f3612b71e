#include "rangeloc/measurements.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <string>

#include "rangeloc/errors.hpp"

namespace rangeloc {

double best_tetrahedron_volume(const std::vector<Vec3>& points) {
  const std::size_t n = points.size();
  double best = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c)
        for (std::size_t d = c + 1; d < n; ++d) {
          const Vec3 u = points[b] - points[a];
          const Vec3 v = points[c] - points[a];
          const Vec3 w = points[d] - points[a];
          best = std::max(best, std::abs(u.dot(v.cross(w))) / 6.0);
        }
  return best;
}

bool non_coplanar(const std::vector<Vec3>& points, double tol) {
  return best_tetrahedron_volume(points) > tol;
}

AnchorSet::AnchorSet(std::vector<Anchor> anchors) {
  for (const auto& a : anchors) add(a);
}

void AnchorSet::add(const Anchor& a) {
  if (contains(a.id)) throw ConfigError("duplicate anchor id " + std::to_string(a.id));
  if (!a.p.allFinite()) throw ConfigError("anchor " + std::to_string(a.id) + " has a non-finite position");
  index_[a.id] = anchors_.size();
  anchors_.push_back(a);
}

const Vec3& AnchorSet::position(AnchorId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw StreamError("unknown anchor id " + std::to_string(id));
  return anchors_[it->second].p;
}

std::vector<AnchorId> AnchorSet::ids() const {
  std::vector<AnchorId> out;
  out.reserve(index_.size());
  for (const auto& [id, idx] : index_) out.push_back(id);
  return out;
}

void AnchorSet::bounding_box(Vec3& lo, Vec3& hi) const {
  if (anchors_.empty()) throw ConfigError("empty anchor set has no bounding box");
  lo = hi = anchors_.front().p;
  for (const auto& a : anchors_) {
    lo = lo.cwiseMin(a.p);
    hi = hi.cwiseMax(a.p);
  }
}

bool AnchorSet::is_non_coplanar(double tol) const {
  std::vector<Vec3> pts;
  for (const auto& a : anchors_) pts.push_back(a.p);
  return non_coplanar(pts, tol);
}

}  // namespace rangeloc
