#include "partreg/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "partreg/rng.hpp"
#include "partreg/rotation.hpp"

namespace partreg {

namespace {

constexpr int kRing = 8;
constexpr double kSurfaceEps = 0.01;

constexpr std::array<int, kNumJoints> kPrimaryChild = {
    kSpine1, kLeftKnee, kRightKnee, kSpine2, kLeftAnkle, kRightAnkle, kSpine3, kLeftFoot,
    kRightFoot, kNeck, -1, -1, kHead, kLeftShoulder, kRightShoulder, -1, kLeftElbow, kRightElbow,
    kLeftWrist, kRightWrist, kLeftHand, kRightHand, -1, -1};

constexpr std::array<double, kNumJoints> kRadius = {
    0.11, 0.065, 0.065, 0.10, 0.05, 0.05, 0.10, 0.04, 0.04, 0.11, 0.035, 0.035,
    0.05, 0.045, 0.045, 0.09, 0.045, 0.045, 0.035, 0.035, 0.03, 0.03, 0.03, 0.03};

bool is_right(int j) { return kMirrorJoint[j] < j; }

Vec3 mirrored(const Vec3& v) { return {-v.x(), v.y(), v.z()}; }

struct Skeleton {
  std::array<Vec3, kNumJoints> joint;
  std::array<Vec3, kNumJoints> bone_end;
};

Skeleton build_skeleton(const LimbProportions& lp) {
  Skeleton s;
  auto& j = s.joint;
  const double hw = lp.hip_width, sw = lp.shoulder_width, t = lp.torso, l = lp.leg, a = lp.arm;
  j[kPelvis] = {0.0, 0.0, 0.0};
  j[kLeftHip] = {0.09 * hw, 0.0, 0.0};
  j[kSpine1] = {0.0, 0.11 * t, 0.0};
  j[kLeftKnee] = {0.10 * hw, -0.40 * l, 0.0};
  j[kSpine2] = {0.0, 0.24 * t, 0.0};
  j[kLeftAnkle] = {0.10 * hw, -0.80 * l, 0.0};
  j[kSpine3] = {0.0, 0.30 * t, 0.0};
  j[kLeftFoot] = {0.11 * hw, -0.86 * l, 0.10 * l};
  j[kNeck] = {0.0, 0.50 * t, 0.0};
  j[kLeftCollar] = {0.07 * sw, 0.42 * t, 0.0};
  j[kHead] = {0.0, 0.60 * t, 0.0};
  j[kLeftShoulder] = {0.18 * sw, 0.44 * t, 0.0};
  j[kLeftElbow] = {0.18 * sw + 0.26 * a, 0.44 * t, 0.0};
  j[kLeftWrist] = {0.18 * sw + 0.50 * a, 0.44 * t, 0.0};
  j[kLeftHand] = {0.18 * sw + 0.58 * a, 0.44 * t, 0.0};
  for (int i = 0; i < kNumJoints; ++i) {
    if (is_right(i)) j[i] = mirrored(j[kMirrorJoint[i]]);
  }
  for (int i = 0; i < kNumJoints; ++i) {
    if (is_right(i)) continue;
    if (kPrimaryChild[i] >= 0) {
      s.bone_end[i] = j[kPrimaryChild[i]];
    } else if (i == kHead) {
      s.bone_end[i] = j[i] + Vec3(0.0, 0.16 * t, 0.0);
    } else if (i == kLeftFoot) {
      s.bone_end[i] = j[i] + Vec3(0.0, 0.0, 0.08 * l);
    } else {  // left hand
      s.bone_end[i] = j[i] + Vec3(0.08 * a, 0.0, 0.0);
    }
  }
  for (int i = 0; i < kNumJoints; ++i) {
    if (is_right(i)) s.bone_end[i] = mirrored(s.bone_end[kMirrorJoint[i]]);
  }
  return s;
}

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Unit direction from the bone axis to p (zero on the axis).
Vec3 radial_direction(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = (p - a).dot(ab) / ab.squaredNorm();
  const Vec3 r = p - (a + t * ab);
  const double n = r.norm();
  return n > 0.0 ? Vec3(r / n) : Vec3::Zero();
}

// Ring directions at angles pi/8 + k*pi/4 with exact sign symmetry.
std::array<std::pair<double, double>, kRing> ring_table() {
  const double c1 = std::cos(M_PI / 8.0), s1 = std::sin(M_PI / 8.0);
  const double c2 = std::cos(3.0 * M_PI / 8.0), s2 = std::sin(3.0 * M_PI / 8.0);
  return {{{c1, s1}, {c2, s2}, {-c2, s2}, {-c1, s1}, {-c1, -s1}, {-c2, -s2}, {c2, -s2}, {c1, -s1}}};
}

std::array<int, kNumJoints> vertices_per_part(int total) {
  std::array<int, kNumJoints> n{};
  const int base = total / kNumJoints;
  n.fill(base);
  int rem = total - base * kNumJoints;
  constexpr std::array<int, 6> center = {kPelvis, kSpine1, kSpine2, kSpine3, kNeck, kHead};
  for (int i = 0; rem > 0; i = (i + 1) % 6, --rem) ++n[center[i]];
  return n;
}

struct PartLayout {
  int first = 0;  // first vertex index
  int rings = 0;
  int axis = 0;
};

}  // namespace

GeneratedModel gen_template(const GenSpec& spec) {
  require(spec.vertex_count >= kNumJoints * kMinVerticesPerPart,
          "gen_template: vertex_count must be at least " +
              std::to_string(kNumJoints * kMinVerticesPerPart));
  require(std::isfinite(spec.noise_scale) && spec.noise_scale >= 0.0,
          "gen_template: noise_scale must be non-negative");
  const auto& lp = spec.limb_proportions;
  for (double f : {lp.arm, lp.leg, lp.torso, lp.shoulder_width, lp.hip_width}) {
    require(std::isfinite(f) && f > 0.2 && f < 5.0, "gen_template: limb proportion outside (0.2, 5)");
  }

  const Skeleton sk = build_skeleton(lp);
  const auto counts = vertices_per_part(spec.vertex_count);
  const auto table = ring_table();

  std::array<PartLayout, kNumJoints> layout{};
  int next = 0;
  for (int p = 0; p < kNumJoints; ++p) {
    layout[p].first = next;
    layout[p].rings = (counts[p] - 1) / kRing;
    layout[p].axis = counts[p] - kRing * layout[p].rings;
    next += counts[p];
  }

  GeneratedModel out;
  BodyTemplate& t = out.tmpl;
  const int nv = spec.vertex_count;
  t.vertices_rest.resize(nv, 3);
  std::vector<int> owner(nv);

  // Left and centre parts are laid out directly; right parts are their mirror images.
  for (int p = 0; p < kNumJoints; ++p) {
    const PartLayout& pl = layout[p];
    if (is_right(p)) {
      const PartLayout& src = layout[kMirrorJoint[p]];
      for (int i = 0; i < counts[p]; ++i) {
        t.vertices_rest.row(pl.first + i) =
            mirrored(t.vertices_rest.row(src.first + i).transpose()).transpose();
        owner[pl.first + i] = p;
      }
      continue;
    }
    const Vec3 a = sk.joint[p];
    const Vec3 b = sk.bone_end[p];
    const Vec3 axis = (b - a).normalized();
    const Vec3 ref = std::abs(axis.z()) > 0.9 ? Vec3::UnitX() : Vec3::UnitZ();
    const Vec3 e1 = axis.cross(ref).normalized();
    const Vec3 e2 = axis.cross(e1);
    int v = pl.first;
    for (int r = 0; r < pl.rings; ++r) {
      const double s = pl.rings == 1 ? 0.0 : static_cast<double>(r) / (pl.rings - 1);
      const Vec3 centre = a + s * (b - a);
      for (const auto& [c, sn] : table) {
        t.vertices_rest.row(v) = (centre + kRadius[p] * (c * e1 + sn * e2)).transpose();
        owner[v++] = p;
      }
    }
    for (int k = 0; k < pl.axis; ++k) {
      const double s = static_cast<double>(k + 1) / (pl.axis + 1);
      t.vertices_rest.row(v) = (a + s * (b - a)).transpose();
      owner[v++] = p;
    }
  }

  // Faces: ring strips and fan caps per part.
  std::vector<std::array<int, 3>> faces;
  for (int p = 0; p < kNumJoints; ++p) {
    const PartLayout& pl = layout[p];
    const auto ring = [&](int r, int k) { return pl.first + r * kRing + (k % kRing); };
    for (int r = 0; r + 1 < pl.rings; ++r) {
      for (int k = 0; k < kRing; ++k) {
        faces.push_back({ring(r, k), ring(r, k + 1), ring(r + 1, k + 1)});
        faces.push_back({ring(r, k), ring(r + 1, k + 1), ring(r + 1, k)});
      }
    }
    for (int cap : {0, pl.rings - 1}) {
      for (int k = 1; k + 1 < kRing; ++k) faces.push_back({ring(cap, 0), ring(cap, k), ring(cap, k + 1)});
    }
  }
  t.faces.resize(static_cast<Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int c = 0; c < 3; ++c) t.faces(static_cast<Index>(f), c) = faces[f][c];
  }

  t.joints_rest.resize(kNumJoints, 3);
  for (int j = 0; j < kNumJoints; ++j) t.joints_rest.row(j) = sk.joint[j].transpose();
  t.parent.assign(kSmplParents.begin(), kSmplParents.end());

  // Blend weights from the two bones whose capsule surfaces are nearest,
  // ordered by (distance, index).
  t.blend_weights = MatX::Zero(nv, kNumJoints);
  for (int v = 0; v < nv; ++v) {
    const Vec3 p = t.vertices_rest.row(v).transpose();
    std::array<std::pair<double, int>, kNumJoints> d;
    for (int b = 0; b < kNumJoints; ++b) {
      const double surface = segment_distance(p, sk.joint[b], sk.bone_end[b]) - kRadius[b];
      d[b] = {std::max(surface, 0.0), b};
    }
    std::partial_sort(d.begin(), d.begin() + 2, d.end());
    const double w0 = 1.0 / (d[0].first + kSurfaceEps);
    const double w1 = 1.0 / (d[1].first + kSurfaceEps);
    t.blend_weights(v, d[0].second) = w0 / (w0 + w1);
    t.blend_weights(v, d[1].second) = w1 / (w0 + w1);
  }

  // Joint regressor: mean of the ring centred on each joint.
  t.joint_regressor = MatX::Zero(kNumJoints, nv);
  for (int j = 0; j < kNumJoints; ++j) {
    for (int k = 0; k < kRing; ++k) t.joint_regressor(j, layout[j].first + k) = 1.0 / kRing;
  }

  // Shape basis: smooth fields, odd in x for the x component and even otherwise,
  // scaled by seeded amplitudes.
  Rng rng(spec.seed);
  std::array<double, kNumBetas> amp{};
  for (double& x : amp) x = rng.uniform(0.8, 1.2);
  t.shape_basis.assign(kNumBetas, MatX3::Zero(nv, 3));
  for (int v = 0; v < nv; ++v) {
    const Vec3 p = t.vertices_rest.row(v).transpose();
    const double x = p.x(), y = p.y(), z = p.z();
    const int o = owner[v];
    const Vec3 radial = radial_direction(p, sk.joint[o], sk.bone_end[o]);
    const double ax = std::abs(x);
    const std::array<Vec3, kNumBetas> field = {
        Vec3(0.03 * x, 0.03 * y, 0.03 * z),
        Vec3(0.0, 0.03 * y, 0.0),
        Vec3(0.02 * radial),
        Vec3(0.02 * x * 0.5 * (1.0 + std::tanh(5.0 * (y - 0.2))), 0.0, 0.0),
        Vec3(0.0, 0.02 * std::min(y, 0.0), 0.0),
        Vec3(0.02 * (x < 0.0 ? -1.0 : 1.0) * std::max(ax - 0.18, 0.0), 0.0, 0.0),
        Vec3(0.01 * x * std::cos(3.0 * y), 0.0, 0.0),
        Vec3(0.0, 0.0, 0.01 * std::cos(4.0 * y)),
        Vec3(0.0, 0.01 * x * x, 0.0),
        Vec3(0.01 * x * z, 0.01 * y * z, 0.0)};
    for (int k = 0; k < kNumBetas; ++k) t.shape_basis[k].row(v) = amp[k] * field[k].transpose();
  }

  if (spec.noise_scale > 0.0) {
    for (int v = 0; v < nv; ++v) {
      for (int c = 0; c < 3; ++c) t.vertices_rest(v, c) += spec.noise_scale * rng.normal();
    }
  }

  out.assignment = assign_parts(t.blend_weights);
  std::array<int, kNumJoints> owned{};
  for (int p : out.assignment.part_of_vertex) ++owned[p];
  for (int p = 0; p < kNumJoints; ++p) {
    require(owned[p] > 0, "gen_template: part " + std::string(kJointNames[p]) +
                              " owns no vertex; the spec is infeasible");
  }
  t.validate();
  return out;
}

PosePreset parse_pose_preset(const std::string& name) {
  if (name == "rest") return PosePreset::kRest;
  if (name == "t_pose") return PosePreset::kTPose;
  if (name == "hands_behind_back") return PosePreset::kHandsBehindBack;
  if (name == "crouch") return PosePreset::kCrouch;
  if (name == "random") return PosePreset::kRandom;
  throw InvalidArgument("unknown pose preset '" + name +
                        "' (expected rest, t_pose, hands_behind_back, crouch or random)");
}

std::string to_string(PosePreset preset) {
  switch (preset) {
    case PosePreset::kRest: return "rest";
    case PosePreset::kTPose: return "t_pose";
    case PosePreset::kHandsBehindBack: return "hands_behind_back";
    case PosePreset::kCrouch: return "crouch";
    case PosePreset::kRandom: return "random";
  }
  return "unknown";
}

Vec3 mirror_axis_angle(const Vec3& axis_angle) {
  return {axis_angle.x(), -axis_angle.y(), -axis_angle.z()};
}

namespace {

// Axis-angle of the minimal rotation taking unit vector `from` to `to`.
Vec3 rotation_between(const Vec3& from, const Vec3& to) {
  const Vec3 f = from.normalized(), t = to.normalized();
  const Vec3 axis = f.cross(t);
  const double s = axis.norm();
  const double angle = std::atan2(s, f.dot(t));
  if (s < 1e-12) return Vec3::Zero();
  return axis / s * angle;
}

void set_pair(PoseShape& ps, int left, const Vec3& aa) {
  ps.theta.row(left) = aa.transpose();
  ps.theta.row(kMirrorJoint[left]) = mirror_axis_angle(aa).transpose();
}

}  // namespace

PoseShape gen_pose(std::uint64_t seed, PosePreset preset) {
  PoseShape ps = PoseShape::zero();
  switch (preset) {
    case PosePreset::kRest:
    case PosePreset::kTPose:
      break;
    case PosePreset::kHandsBehindBack: {
      // Upper arm down and back, forearm across the lower back.
      const Vec3 upper = Vec3(0.25, -0.75, -0.6).normalized();
      const Vec3 fore = Vec3(-0.9, 0.15, -0.25).normalized();
      const Vec3 shoulder = rotation_between(Vec3::UnitX(), upper);
      const Mat3 r_sh = rodrigues(shoulder);
      const Vec3 elbow = rotation_between(Vec3::UnitX(), r_sh.transpose() * fore);
      set_pair(ps, kLeftShoulder, shoulder);
      set_pair(ps, kLeftElbow, elbow);
      break;
    }
    case PosePreset::kCrouch:
      set_pair(ps, kLeftHip, Vec3(-1.2, 0.0, 0.0));
      set_pair(ps, kLeftKnee, Vec3(2.0, 0.0, 0.0));
      set_pair(ps, kLeftAnkle, Vec3(-0.7, 0.0, 0.0));
      ps.theta.row(kSpine1) = Vec3(0.3, 0.0, 0.0).transpose();
      set_pair(ps, kLeftShoulder, Vec3(0.0, 0.0, -1.0));
      break;
    case PosePreset::kRandom: {
      Rng rng(seed);
      for (int c = 0; c < 3; ++c) ps.theta(0, c) = rng.uniform(-M_PI / 4.0, M_PI / 4.0);
      for (int j = 1; j < kNumJoints; ++j) {
        for (int c = 0; c < 3; ++c) ps.theta(j, c) = rng.uniform(-0.4, 0.4);
      }
      for (int k = 0; k < kNumBetas; ++k) ps.beta[k] = rng.uniform(-1.0, 1.0);
      break;
    }
  }
  return ps;
}

}  // namespace partreg
