#pragma once

#include <vector>

#include "partreg/common.hpp"

namespace partreg {

/// Rest-pose mesh and skinning data of an SMPL-style body.
///
/// The joint count J is both the length of the kinematic tree and the number
/// of regressor rows (24 for generated templates; smaller toy chains are
/// allowed). shape_basis holds one V×3 displacement field per shape coefficient.
struct BodyTemplate {
  MatX3 vertices_rest;
  MatX3i faces;
  MatX3 joints_rest;
  std::vector<int> parent;  // parent[0] == -1
  MatX blend_weights;       // V×J
  std::vector<MatX3> shape_basis;
  MatX joint_regressor;     // J×V

  Index num_vertices() const { return vertices_rest.rows(); }
  Index num_faces() const { return faces.rows(); }
  int num_joints() const { return static_cast<int>(parent.size()); }
  int num_betas() const { return static_cast<int>(shape_basis.size()); }

  /// Throws InvalidArgument when any structural invariant is violated.
  void validate() const;
};

/// Axis-angle pose (J×3) and shape coefficients.
struct PoseShape {
  MatX3 theta;
  VecX beta;

  static PoseShape zero(int num_joints = kNumJoints, int num_betas = kNumBetas);

  /// Throws InvalidArgument on non-finite entries or a joint angle >= 2*pi.
  void validate() const;
};

struct PosedBody {
  MatX3 vertices;
  MatX3 joints3d;
  std::vector<Mat3> global_rotations;
};

MatX3 shape_blend(const BodyTemplate& tmpl, const VecX& beta);

/// Rest joints displaced by the regressed shape offset.
MatX3 shaped_joints(const BodyTemplate& tmpl, const VecX& beta);

MatX3 regress_joints(const MatX& regressor, const MatX3& vertices);

/// Shape blending, forward kinematics along the parent chain, linear blend
/// skinning, then joint regression from the skinned mesh. `trans` is added to
/// every vertex before regression.
PosedBody forward(const BodyTemplate& tmpl, const PoseShape& ps, const Vec3& trans = Vec3::Zero());

/// Pose whose root rotation is pre-multiplied by `rotation`. forward() of the
/// result equals rotation·(X - c) + c, where c is the shaped root joint.
PoseShape rotate_root(const PoseShape& ps, const Mat3& rotation);

}  // namespace partreg
