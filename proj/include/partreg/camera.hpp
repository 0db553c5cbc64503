#pragma once

#include "partreg/common.hpp"

namespace partreg {

/// Weak-perspective camera x = s·Π(R·X) + t in crop pixels.
///
/// Pixel origin is the image's top-left corner, +x right, +y down. The camera
/// looks along +z of its own frame, so smaller camera-frame z is nearer.
struct WeakPerspectiveCamera {
  double s = 1.0;
  Vec2 t = Vec2::Zero();
  Mat3 R = Mat3::Identity();

  /// Throws InvalidArgument unless s > 0 and R is orthonormal within 1e-9.
  void validate() const;

  /// Upright view of a y-up body: rotation by pi about x, so the body's +y
  /// maps to image-up and its front (+z) faces the camera.
  static WeakPerspectiveCamera front_view(double scale, const Vec2& translation);
};

MatX2 project(const WeakPerspectiveCamera& cam, const MatX3& points);

/// Camera-frame coordinates R·X (z used for depth ordering).
MatX3 to_camera_frame(const WeakPerspectiveCamera& cam, const MatX3& points);

/// Vector-Jacobian product of project() with respect to the points, s and t.
struct ProjectGrad {
  MatX3 points;
  double s = 0.0;
  Vec2 t = Vec2::Zero();
};
ProjectGrad project_backward(const WeakPerspectiveCamera& cam, const MatX3& points,
                             const MatX2& grad_out);

}  // namespace partreg
