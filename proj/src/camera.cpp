#include "partreg/camera.hpp"

#include <cmath>

#include "partreg/rotation.hpp"

namespace partreg {

void WeakPerspectiveCamera::validate() const {
  require(std::isfinite(s) && s > 0.0, "camera: scale must be positive");
  require(t.allFinite() && R.allFinite(), "camera: non-finite parameters");
  require(orthonormality_error(R) < 1e-9, "camera: R is not orthonormal");
}

WeakPerspectiveCamera WeakPerspectiveCamera::front_view(double scale, const Vec2& translation) {
  WeakPerspectiveCamera cam;
  cam.s = scale;
  cam.t = translation;
  cam.R = Vec3(1.0, -1.0, -1.0).asDiagonal();
  return cam;
}

MatX3 to_camera_frame(const WeakPerspectiveCamera& cam, const MatX3& points) {
  return points * cam.R.transpose();
}

MatX2 project(const WeakPerspectiveCamera& cam, const MatX3& points) {
  cam.validate();
  const MatX3 rotated = to_camera_frame(cam, points);
  MatX2 out = cam.s * rotated.leftCols<2>();
  out.rowwise() += cam.t.transpose();
  return out;
}

ProjectGrad project_backward(const WeakPerspectiveCamera& cam, const MatX3& points,
                             const MatX2& grad_out) {
  require(grad_out.rows() == points.rows(), "project_backward: row mismatch");
  const MatX3 rotated = to_camera_frame(cam, points);
  ProjectGrad g;
  g.s = (grad_out.array() * rotated.leftCols<2>().array()).sum();
  g.t = grad_out.colwise().sum().transpose();
  // d(s R_{0:2} X)/dX = s R_{0:2}
  g.points = cam.s * grad_out * cam.R.topRows<2>();
  return g;
}

}  // namespace partreg
