#include "partreg/rotation.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace partreg {

namespace {

// sin(a)/a and (1 - cos a)/a^2 with series fallbacks near zero.
struct RodriguesCoeffs {
  double a;
  double b;
};

RodriguesCoeffs coeffs(double angle) {
  if (angle < kSmallAngle) {
    const double a2 = angle * angle;
    return {1.0 - a2 / 6.0, 0.5 - a2 / 24.0};
  }
  const double half_sin = std::sin(0.5 * angle);
  return {std::sin(angle) / angle, 2.0 * half_sin * half_sin / (angle * angle)};
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return k;
}

Mat3 rodrigues(const Vec3& axis_angle) {
  if (!axis_angle.allFinite()) throw InvalidArgument("rodrigues: non-finite axis-angle");
  const double angle = axis_angle.norm();
  const auto [a, b] = coeffs(angle);
  const Mat3 k = skew(axis_angle);
  return Mat3::Identity() + a * k + b * (k * k);
}

std::array<Mat3, 3> rodrigues_jacobian(const Vec3& axis_angle) {
  if (!axis_angle.allFinite()) throw InvalidArgument("rodrigues_jacobian: non-finite axis-angle");
  const double angle = axis_angle.norm();
  const Mat3 k = skew(axis_angle);
  const Mat3 k2 = k * k;

  // da/dangle / angle and db/dangle / angle; the closed forms cancel badly for
  // small angles, so the series is used well above kSmallAngle.
  double a, b, da, db;
  if (angle < 1e-3) {
    const double a2 = angle * angle;
    a = 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
    b = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
    da = -1.0 / 3.0 + a2 / 30.0;
    db = -1.0 / 12.0 + a2 / 180.0;
  } else {
    const double s = std::sin(angle);
    const double c = std::cos(angle);
    const double a2 = angle * angle;
    a = s / angle;
    b = (1.0 - c) / a2;
    da = (angle * c - s) / (a2 * angle);
    db = (angle * s - 2.0 * (1.0 - c)) / (a2 * a2);
  }

  std::array<Mat3, 3> out;
  for (int i = 0; i < 3; ++i) {
    const Mat3 e = skew(Vec3::Unit(i));
    out[i] = a * e + b * (e * k + k * e) + (da * axis_angle[i]) * k + (db * axis_angle[i]) * k2;
  }
  return out;
}

Vec3 axis_angle_from_matrix(const Mat3& rotation) {
  if (!rotation.allFinite()) throw InvalidArgument("axis_angle_from_matrix: non-finite matrix");
  const Eigen::AngleAxisd aa{Eigen::Quaterniond(rotation).normalized()};
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  if (angle > M_PI) {
    angle = 2.0 * M_PI - angle;
    axis = -axis;
  }
  return axis * angle;
}

Mat3 rotation_from_6d(const Eigen::Matrix<double, 6, 1>& six) {
  const Vec3 a1 = six.head<3>();
  const Vec3 a2 = six.tail<3>();
  const double n1 = a1.norm();
  if (!(n1 > 1e-12)) return Mat3::Identity();
  const Vec3 b1 = a1 / n1;
  Vec3 u = a2 - b1.dot(a2) * b1;
  if (!(u.norm() > 1e-12 * std::max(1.0, a2.norm()))) {
    for (int i = 0; i < 3; ++i) {
      const Vec3 e = Vec3::Unit(i);
      u = e - b1.dot(e) * b1;
      if (u.norm() > 0.5) break;
    }
  }
  const Vec3 b2 = u.normalized();
  Mat3 r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b1.cross(b2);
  return r;
}

Eigen::Matrix<double, 6, 1> rotation_to_6d(const Mat3& rotation) {
  Eigen::Matrix<double, 6, 1> six;
  six << rotation.col(0), rotation.col(1);
  return six;
}

double orthonormality_error(const Mat3& rotation) {
  return (rotation.transpose() * rotation - Mat3::Identity()).norm();
}

}  // namespace partreg
