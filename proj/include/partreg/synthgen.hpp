#pragma once

#include <cstdint>
#include <string>

#include "partreg/body_model.hpp"
#include "partreg/ref_planes.hpp"

namespace partreg {

/// Scale factors applied to the default skeleton.
struct LimbProportions {
  double arm = 1.0;
  double leg = 1.0;
  double torso = 1.0;
  double shoulder_width = 1.0;
  double hip_width = 1.0;
};

struct GenSpec {
  std::uint64_t seed = 0;
  int vertex_count = 690;
  LimbProportions limb_proportions;
  double noise_scale = 0.0;  // std-dev (metres) of per-vertex rest noise
};

/// Each part needs two rings of 8 vertices plus one axis vertex.
inline constexpr int kMinVerticesPerPart = 17;

struct GeneratedModel {
  BodyTemplate tmpl;
  PartAssignment assignment;
};

/// Capsule body around the 24-joint SMPL skeleton in a T-pose: y up, body's
/// left along +x, facing +z, pelvis at the origin.
///
/// Each part is a capsule of 8-vertex rings from its joint to its child (or an
/// end site) plus vertices on the bone axis. Blend weights are inverse
/// distances (to the capsule surfaces) of the two nearest bones; the joint
/// regressor averages the ring centred on each joint. With noise_scale 0 the
/// mesh is exactly mirror-symmetric in x. Throws InvalidArgument for
/// infeasible specs.
GeneratedModel gen_template(const GenSpec& spec);

enum class PosePreset { kRest, kTPose, kHandsBehindBack, kCrouch, kRandom };

PosePreset parse_pose_preset(const std::string& name);
std::string to_string(PosePreset preset);

/// Deterministic preset pose; kRandom draws theta in a joint-limit box and beta
/// in [-1, 1] from `seed`. Other presets ignore the seed and use beta = 0.
PoseShape gen_pose(std::uint64_t seed, PosePreset preset);

/// Rotation-axis vector of R' = M R M for the x-mirror M.
Vec3 mirror_axis_angle(const Vec3& axis_angle);

}  // namespace partreg
