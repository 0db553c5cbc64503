#include "partreg/body_model.hpp"

#include <cmath>
#include <string>

#include "partreg/rotation.hpp"

namespace partreg {

void BodyTemplate::validate() const {
  const Index v = num_vertices();
  const int j = num_joints();
  require(v > 0, "template: no vertices");
  require(j > 0, "template: no joints");
  require(vertices_rest.allFinite(), "template: non-finite rest vertices");
  require(joints_rest.rows() == j, "template: joints_rest rows != parent length");
  require(joints_rest.allFinite(), "template: non-finite rest joints");
  require(parent[0] == -1, "template: parent[0] must be -1");
  for (int i = 1; i < j; ++i) {
    require(parent[i] >= 0 && parent[i] < i,
            "template: parent of joint " + std::to_string(i) + " must precede it");
  }
  for (Index f = 0; f < faces.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      require(faces(f, c) >= 0 && faces(f, c) < v, "template: face index out of range");
    }
  }
  require(blend_weights.rows() == v && blend_weights.cols() == j,
          "template: blend_weights must be V×J");
  for (Index i = 0; i < v; ++i) {
    require((blend_weights.row(i).array() >= 0.0).all(), "template: negative blend weight");
    require(std::abs(blend_weights.row(i).sum() - 1.0) <= 1e-9,
            "template: blend weights of vertex " + std::to_string(i) + " do not sum to 1");
  }
  for (const auto& field : shape_basis) {
    require(field.rows() == v, "template: shape basis field has wrong vertex count");
    require(field.allFinite(), "template: non-finite shape basis");
  }
  require(joint_regressor.rows() == j && joint_regressor.cols() == v,
          "template: joint_regressor must be J×V");
  for (int r = 0; r < j; ++r) {
    require(std::abs(joint_regressor.row(r).sum() - 1.0) <= 1e-9,
            "template: joint regressor row " + std::to_string(r) + " does not sum to 1");
  }
}

PoseShape PoseShape::zero(int num_joints, int num_betas) {
  return {MatX3::Zero(num_joints, 3), VecX::Zero(num_betas)};
}

void PoseShape::validate() const {
  require(theta.allFinite() && beta.allFinite(), "pose: non-finite entries");
  for (Index j = 0; j < theta.rows(); ++j) {
    require(theta.row(j).norm() < 2.0 * M_PI, "pose: joint angle outside [0, 2pi)");
  }
}

MatX3 shape_blend(const BodyTemplate& tmpl, const VecX& beta) {
  require(beta.allFinite(), "shape_blend: non-finite beta");
  require(beta.size() == tmpl.num_betas(), "shape_blend: beta size != template shape basis size");
  MatX3 out = tmpl.vertices_rest;
  for (int k = 0; k < tmpl.num_betas(); ++k) out += beta[k] * tmpl.shape_basis[k];
  return out;
}

MatX3 shaped_joints(const BodyTemplate& tmpl, const VecX& beta) {
  MatX3 offset = MatX3::Zero(tmpl.num_vertices(), 3);
  for (int k = 0; k < tmpl.num_betas(); ++k) offset += beta[k] * tmpl.shape_basis[k];
  return tmpl.joints_rest + tmpl.joint_regressor * offset;
}

MatX3 regress_joints(const MatX& regressor, const MatX3& vertices) {
  if (regressor.cols() != vertices.rows()) {
    throw InvalidArgument("regress_joints: regressor has " + std::to_string(regressor.cols()) +
                          " columns but there are " + std::to_string(vertices.rows()) +
                          " vertices");
  }
  return regressor * vertices;
}

PosedBody forward(const BodyTemplate& tmpl, const PoseShape& ps, const Vec3& trans) {
  const int nj = tmpl.num_joints();
  require(ps.theta.rows() == nj, "forward: theta rows != template joint count");
  ps.validate();
  require(trans.allFinite(), "forward: non-finite translation");

  const MatX3 v_shaped = shape_blend(tmpl, ps.beta);
  const MatX3 j_shaped = shaped_joints(tmpl, ps.beta);

  std::vector<Mat3> rot(nj);
  std::vector<Vec3> pos(nj);
  for (int j = 0; j < nj; ++j) {
    const Mat3 local = rodrigues(ps.theta.row(j).transpose());
    const Vec3 rest = j_shaped.row(j).transpose();
    const int p = tmpl.parent[j];
    if (p < 0) {
      rot[j] = local;
      pos[j] = rest;
    } else {
      rot[j] = rot[p] * local;
      pos[j] = rot[p] * (rest - j_shaped.row(p).transpose()) + pos[p];
    }
  }

  // Skinning transform of joint j: x -> rot[j] (x - rest_j) + pos[j].
  std::vector<Vec3> offset(nj);
  for (int j = 0; j < nj; ++j) offset[j] = pos[j] - rot[j] * j_shaped.row(j).transpose();

  PosedBody out;
  out.vertices.resize(tmpl.num_vertices(), 3);
  for (Index i = 0; i < tmpl.num_vertices(); ++i) {
    Mat3 r = Mat3::Zero();
    Vec3 t = Vec3::Zero();
    for (int j = 0; j < nj; ++j) {
      const double w = tmpl.blend_weights(i, j);
      if (w == 0.0) continue;
      r += w * rot[j];
      t += w * offset[j];
    }
    out.vertices.row(i) = (r * v_shaped.row(i).transpose() + t + trans).transpose();
  }
  out.joints3d = regress_joints(tmpl.joint_regressor, out.vertices);
  out.global_rotations = std::move(rot);
  return out;
}

PoseShape rotate_root(const PoseShape& ps, const Mat3& rotation) {
  PoseShape out = ps;
  const Mat3 root = rotation * rodrigues(ps.theta.row(0).transpose());
  out.theta.row(0) = axis_angle_from_matrix(root).transpose();
  return out;
}

}  // namespace partreg
