#pragma once

#include <array>

#include "partreg/common.hpp"

namespace partreg {

/// Angle below which the axis-angle maps switch to their Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;

/// Axis-angle vector to rotation matrix. Throws InvalidArgument on non-finite input.
Mat3 rodrigues(const Vec3& axis_angle);

/// Partial derivatives dR/dv_i of rodrigues() for i = 0, 1, 2.
std::array<Mat3, 3> rodrigues_jacobian(const Vec3& axis_angle);

/// Inverse of rodrigues(); returns the vector with angle in [0, pi].
Vec3 axis_angle_from_matrix(const Mat3& rotation);

/// Skew-symmetric cross-product matrix of v.
Mat3 skew(const Vec3& v);

/// Gram-Schmidt on the two 3-vectors packed in `six`. A zero first column
/// yields the identity; a second column parallel to the first is replaced by
/// the first coordinate axis not parallel to it.
Mat3 rotation_from_6d(const Eigen::Matrix<double, 6, 1>& six);

/// First two columns of a rotation, the inverse of rotation_from_6d on SO(3).
Eigen::Matrix<double, 6, 1> rotation_to_6d(const Mat3& rotation);

/// ||R^T R - I||_F
double orthonormality_error(const Mat3& rotation);

}  // namespace partreg
