#include "rangeloc/lie.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>

#include "rangeloc/errors.hpp"

namespace rangeloc {

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = R;
  m.topRightCorner<3, 1>() = t;
  return m;
}

Pose Pose::from_matrix(const Mat4& m) {
  return Pose{m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

Mat3 hat3(const Vec3& w) {
  Mat3 s;
  // clang-format off
  s <<  0.0, -w.z(),  w.y(),
       w.z(),   0.0, -w.x(),
      -w.y(),  w.x(),   0.0;
  // clang-format on
  return s;
}

Vec3 vee3(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 exp_so3(const RotationVector& omega) {
  const double theta = omega.norm();
  const Mat3 W = hat3(omega);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + W + 0.5 * W * W;
  }
  const double half = 0.5 * theta;
  const double s_half = std::sin(half);
  // (1 - cos) / theta^2 written as 2 sin^2(theta/2) / theta^2.
  const double a = std::sin(theta) / theta;
  const double b = 2.0 * s_half * s_half / (theta * theta);
  return Mat3::Identity() + a * W + b * W * W;
}

namespace {

// Unit axis of a rotation whose angle is close to pi, taken from the
// symmetric part (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T.
Vec3 axis_near_pi(const Mat3& R, double cos_theta) {
  const Mat3 B = 0.5 * (R + R.transpose()) - cos_theta * Mat3::Identity();
  int k = 0;
  B.diagonal().maxCoeff(&k);
  Vec3 axis = B.col(k) / std::sqrt(std::max(B(k, k), 1e-300));
  axis.normalize();

  const Vec3 v = vee3(R - R.transpose());  // 2 sin(theta) * axis
  const double proj = v.dot(axis);
  if (std::abs(proj) > 1e-12) {
    if (proj < 0.0) axis = -axis;
  } else {
    // Exactly pi: +a and -a are the same rotation. Make the largest-magnitude
    // component positive.
    int j = 0;
    axis.cwiseAbs().maxCoeff(&j);
    if (axis[j] < 0.0) axis = -axis;
  }
  return axis;
}

}  // namespace

RotationVector log_so3(const Mat3& R) {
  if (!is_rotation(R)) {
    throw InvalidRotation("log_so3: matrix is not a proper rotation");
  }
  const Vec3 v = vee3(R - R.transpose());
  const double sin_theta = 0.5 * v.norm();
  const double cos_theta = 0.5 * (R.trace() - 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < kSmallAngle) {
    // theta / sin(theta) ~ 1 + theta^2 / 6
    return 0.5 * (1.0 + theta * theta / 6.0) * v;
  }
  if (std::numbers::pi - theta < 1e-3) {
    return theta * axis_near_pi(R, cos_theta);
  }
  return (0.5 * theta / sin_theta) * v;
}

Mat3 left_jacobian_so3(const RotationVector& omega) {
  const double theta = omega.norm();
  const Mat3 W = hat3(omega);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * W + W * W / 6.0;
  }
  const double s_half = std::sin(0.5 * theta);
  const double t2 = theta * theta;
  const double a = 2.0 * s_half * s_half / t2;              // (1 - cos) / theta^2
  const double b = (theta - std::sin(theta)) / (t2 * theta);  // (theta - sin) / theta^3
  return Mat3::Identity() + a * W + b * W * W;
}

Mat3 left_jacobian_so3_inverse(const RotationVector& omega) {
  const double theta = omega.norm();
  const Mat3 W = hat3(omega);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * W + W * W / 12.0;
  }
  const double half = 0.5 * theta;
  // 1 - (theta/2) cot(theta/2), no cancellation in the cot form.
  const double c = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  return Mat3::Identity() - 0.5 * W + c * W * W;
}

Pose exp_se3(const PoseVector& epsilon) {
  const Vec3 omega = epsilon.head<3>();
  const Vec3 u = epsilon.tail<3>();
  return Pose{exp_so3(omega), left_jacobian_so3(omega) * u};
}

PoseVector log_se3(const Pose& P) {
  const Vec3 omega = log_so3(P.R);
  PoseVector eps;
  eps.head<3>() = omega;
  eps.tail<3>() = left_jacobian_so3_inverse(omega) * P.t;
  return eps;
}

Pose compose(const Pose& a, const Pose& b) { return Pose{a.R * b.R, a.R * b.t + a.t}; }

Pose inverse(const Pose& P) {
  const Mat3 Rt = P.R.transpose();
  return Pose{Rt, -Rt * P.t};
}

Mat3 project_to_rotation(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

}  // namespace rangeloc
