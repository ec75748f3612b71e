// Closed-form exponential and logarithm maps for SO(3) and SE(3).
//
// Rotations are stored as 3x3 matrices and poses as (R, t) pairs. Tangent
// vectors follow the (omega, u) ordering: rotational part first, translational
// part second.

#pragma once

#include <Eigen/Core>

namespace rangeloc {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Axis-angle vector; its norm is the rotation angle in radians.
using RotationVector = Vec3;
/// (omega, u): rotational part followed by the translational tangent part.
using PoseVector = Vec6;

/// Below this angle the closed forms switch to their Taylor series.
inline constexpr double kSmallAngle = 1e-6;
/// Orthonormality / determinant tolerance accepted by log_so3.
inline constexpr double kRotationTolerance = 1e-9;

struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static Pose identity() { return {}; }
  Mat4 matrix() const;
  static Pose from_matrix(const Mat4& m);
};

/// Skew-symmetric matrix with hat3(w) * v == w.cross(v).
Mat3 hat3(const Vec3& omega);

/// Inverse of hat3 for an antisymmetric input.
Vec3 vee3(const Mat3& m);

bool is_rotation(const Mat3& R, double tol = kRotationTolerance);

Mat3 exp_so3(const RotationVector& omega);

/// Canonical logarithm with |omega| <= pi. Throws InvalidRotation for
/// matrices that are not proper rotations.
RotationVector log_so3(const Mat3& R);

/// Left Jacobian V(omega) of SO(3); maps u to the translation of exp_se3.
Mat3 left_jacobian_so3(const RotationVector& omega);
Mat3 left_jacobian_so3_inverse(const RotationVector& omega);

Pose exp_se3(const PoseVector& epsilon);
PoseVector log_se3(const Pose& P);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& P);

/// Nearest rotation in the Frobenius sense (SVD projection).
Mat3 project_to_rotation(const Mat3& M);

}  // namespace rangeloc
