// Constraint residuals, the Pseudo-Huber loss, and measurement weights.
//
// Scalar constraints (range, smoothness) are robustified as w * rho(e).
// Vector constraints (relative translation / rotation / transformation and the
// pose smoothness constraint) are robustified as rho(sqrt(e^T W e)).

#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "rangeloc/lie.hpp"

namespace rangeloc {

struct RobustLoss {
  double xi = 1.0;  ///< slope parameter, > 0
};

struct LossValue {
  double value = 0.0;
  double derivative = 0.0;  ///< d rho / d(rho_in)
};

/// rho(r) = xi^2 (sqrt(1 + (r/xi)^2) - 1) and its derivative r / sqrt(1 + (r/xi)^2).
LossValue pseudo_huber(double r, double xi);

/// iota^2 / (sigma^2 + iota^2). Equals 1 / (sigma^2 + 1) for iota = 1.
double weight_from_variance(double sigma_sq, double iota);

/// Range weight with sigma_r^2 = eta^2 / 9.
double range_weight(double eta, double iota);
/// Smoothness weight with sigma_s^2 = (v_max * dt)^2 / 9.
double smoothness_weight(double dt, double v_max, double iota);

/// Range from the robot to a fixed anchor.
struct RangeFactor {
  double d = 0.0;             ///< measured range [m]
  Vec3 anchor = Vec3::Zero();  ///< anchor position [m]
  double w_r = 1.0;
  RobustLoss loss;
};

/// Bounded-speed constraint between consecutive translations.
struct SmoothnessFactor {
  double w_s = 1.0;
  double dt = 1.0;     ///< seconds between the two states
  double v_max = 1.0;  ///< m/s
  RobustLoss loss;
};

struct RelTranslationFactor {
  Vec3 l = Vec3::Zero();  ///< measured t_i - t_j
  Mat3 W = Mat3::Identity();
  RobustLoss loss;
};

struct RelRotationFactor {
  Mat3 U = Mat3::Identity();  ///< measured R_i R_j
  Mat3 W = Mat3::Identity();
  RobustLoss loss;
};

struct RelTransformFactor {
  Pose Q;  ///< measured P_i P_j
  Mat6 W = Mat6::Identity();
  RobustLoss loss;
};

/// Pose-chain smoothness built from two orientation-sensor readings.
struct PoseSmoothnessFactor {
  Mat3 R_meas_prev = Mat3::Identity();
  Mat3 R_meas_curr = Mat3::Identity();
  Mat6 W = Mat6::Identity();  ///< diag(W_o, w_s I)
  RobustLoss loss;
};

/// Block-diagonal pose-smoothness weight diag(W_o, w_s I).
Mat6 pose_smoothness_weight(const Mat3& W_o, double w_s);

struct RangeResidual {
  double e = 0.0;
  Vec3 grad = Vec3::Zero();  ///< d e / d t
};

/// Below this robot-to-anchor distance the range Jacobian is undefined.
inline constexpr double kSingularDistance = 1e-9;

/// e = d - |t - anchor|, grad = -(t - anchor)/|t - anchor|.
/// Throws SingularGeometry when the robot sits on the anchor.
RangeResidual range_residual(const Vec3& t, const RangeFactor& f);

double smoothness_residual(const Vec3& t_k, const Vec3& t_prev);

/// l - (t_i - t_j)
Vec3 rel_translation_residual(const Vec3& t_i, const Vec3& t_j, const RelTranslationFactor& f);

/// log(U (R_i R_j)^-1)
Vec3 rel_rotation_residual(const Mat3& R_i, const Mat3& R_j, const RelRotationFactor& f);

/// log(Q (P_i P_j)^-1)
Vec6 rel_transform_residual(const Pose& P_i, const Pose& P_j, const RelTransformFactor& f);

/// log([R_prev^-1 R_curr, 0; 0, 1] * P_k^-1 * P_prev) with R_prev/R_curr the
/// orientation-sensor readings.
Vec6 pose_smoothness_residual(const Pose& P_k, const Pose& P_prev, const PoseSmoothnessFactor& f);

/// Range residual on poses; only the translation columns participate.
double range_residual_pose(const Pose& P_k, const Pose& anchor_pose, double d);

/// w * rho(e)
double scalar_cost(double w, double e, const RobustLoss& loss);

/// rho(sqrt(e^T W e))
template <typename Derived, typename WDerived>
double mahalanobis_cost(const Eigen::MatrixBase<Derived>& e, const Eigen::MatrixBase<WDerived>& W,
                        const RobustLoss& loss) {
  const double q = std::max(0.0, e.dot(W * e));
  return pseudo_huber(std::sqrt(q), loss.xi).value;
}

}  // namespace rangeloc
