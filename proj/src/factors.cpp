#include "rangeloc/factors.hpp"

#include <cmath>

#include "rangeloc/errors.hpp"

namespace rangeloc {

LossValue pseudo_huber(double r, double xi) {
  const double ratio = r / xi;
  const double root = std::sqrt(1.0 + ratio * ratio);
  // xi^2 (root - 1) rewritten as r^2 / (root + 1) to stay accurate for small r.
  return {r * r / (root + 1.0), r / root};
}

double weight_from_variance(double sigma_sq, double iota) {
  const double i2 = iota * iota;
  return i2 / (sigma_sq + i2);
}

double range_weight(double eta, double iota) { return weight_from_variance(eta * eta / 9.0, iota); }

double smoothness_weight(double dt, double v_max, double iota) {
  const double bound = v_max * dt;
  return weight_from_variance(bound * bound / 9.0, iota);
}

Mat6 pose_smoothness_weight(const Mat3& W_o, double w_s) {
  Mat6 W = Mat6::Zero();
  W.topLeftCorner<3, 3>() = W_o;
  W.bottomRightCorner<3, 3>() = w_s * Mat3::Identity();
  return W;
}

RangeResidual range_residual(const Vec3& t, const RangeFactor& f) {
  const Vec3 diff = t - f.anchor;
  const double dist = diff.norm();
  if (dist < kSingularDistance) {
    throw SingularGeometry("range_residual: robot position coincides with anchor");
  }
  return {f.d - dist, -diff / dist};
}

double smoothness_residual(const Vec3& t_k, const Vec3& t_prev) { return (t_k - t_prev).norm(); }

Vec3 rel_translation_residual(const Vec3& t_i, const Vec3& t_j, const RelTranslationFactor& f) {
  return f.l - (t_i - t_j);
}

Vec3 rel_rotation_residual(const Mat3& R_i, const Mat3& R_j, const RelRotationFactor& f) {
  return log_so3(f.U * (R_i * R_j).transpose());
}

Vec6 rel_transform_residual(const Pose& P_i, const Pose& P_j, const RelTransformFactor& f) {
  return log_se3(compose(f.Q, inverse(compose(P_i, P_j))));
}

Vec6 pose_smoothness_residual(const Pose& P_k, const Pose& P_prev, const PoseSmoothnessFactor& f) {
  const Pose delta{f.R_meas_prev.transpose() * f.R_meas_curr, Vec3::Zero()};
  return log_se3(compose(delta, compose(inverse(P_k), P_prev)));
}

double range_residual_pose(const Pose& P_k, const Pose& anchor_pose, double d) {
  const double dist = (P_k.t - anchor_pose.t).norm();
  if (dist < kSingularDistance) {
    throw SingularGeometry("range_residual_pose: robot position coincides with anchor");
  }
  return d - dist;
}

double scalar_cost(double w, double e, const RobustLoss& loss) {
  return w * pseudo_huber(e, loss.xi).value;
}

}  // namespace rangeloc
