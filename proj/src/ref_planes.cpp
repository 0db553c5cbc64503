#include "partreg/ref_planes.hpp"

#include <string>

#include <Eigen/SVD>

namespace partreg {

namespace {

constexpr double kDegenerate = 1e-9;

Vec3 row(const MatX3& m, int i) { return m.row(i).transpose(); }

Plane make_plane(const Vec3& normal, const Vec3& through, std::vector<Vec3> points) {
  Plane p;
  p.normal = normal;
  p.offset = -normal.dot(through);
  p.points = std::move(points);
  return p;
}

// Flip n so that n·reference > 0. An exactly orthogonal reference leaves n
// with its first nonzero component positive.
Vec3 orient(Vec3 n, const Vec3& reference) {
  const double d = n.dot(reference);
  if (d < 0.0) return -n;
  if (d > 0.0) return n;
  for (int i = 0; i < 3; ++i) {
    if (n[i] != 0.0) return n[i] < 0.0 ? Vec3(-n) : n;
  }
  return n;
}

}  // namespace

const Plane& ReferencePlanes::operator[](int k) const {
  switch (k) {
    case 0: return frontal;
    case 1: return side;
    case 2: return cross_section;
    default: throw InvalidArgument("plane index must be 0, 1 or 2");
  }
}

void PartAssignment::validate(Index num_vertices) const {
  require(static_cast<Index>(part_of_vertex.size()) == num_vertices,
          "assignment: length does not match vertex count");
  for (int p : part_of_vertex) require(p >= 0 && p < kNumJoints, "assignment: part out of range");
}

PartAssignment assign_parts(const MatX& blend_weights) {
  PartAssignment out;
  out.part_of_vertex.resize(blend_weights.rows());
  for (Index i = 0; i < blend_weights.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < blend_weights.cols(); ++j) {
      if (blend_weights(i, j) > blend_weights(i, best)) best = j;
    }
    out.part_of_vertex[i] = best;
  }
  return out;
}

ReferencePlanes build_planes(const MatX3& joints3d) {
  require(joints3d.rows() == kNumJoints, "build_planes: expected 24 points");
  require(joints3d.allFinite(), "build_planes: non-finite points");

  const Vec3 pelvis = row(joints3d, kPelvis);
  const Vec3 neck = row(joints3d, kNeck);
  const Vec3 l_sh = row(joints3d, kLeftShoulder);
  const Vec3 r_sh = row(joints3d, kRightShoulder);
  const Vec3 l_hip = row(joints3d, kLeftHip);
  const Vec3 r_hip = row(joints3d, kRightHip);

  // Frontal: smallest right singular vector of the centered quad.
  Eigen::Matrix<double, 4, 3> quad;
  quad << l_sh.transpose(), r_sh.transpose(), l_hip.transpose(), r_hip.transpose();
  const Vec3 centroid = quad.colwise().mean().transpose();
  const Eigen::Matrix<double, 4, 3> centered = quad.rowwise() - centroid.transpose();
  const Eigen::JacobiSVD<Eigen::Matrix<double, 4, 3>> svd(centered, Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv[1] <= kDegenerate * std::max(1.0, sv[0])) {
    throw DegenerateGeometry("build_planes: shoulders and hips are collinear");
  }
  const Vec3 anterior = (l_sh - r_sh).cross(neck - pelvis);
  const Vec3 f = orient(svd.matrixV().col(2).normalized(), anterior);

  ReferencePlanes planes;
  planes.frontal = make_plane(f, centroid, {l_sh, r_sh, l_hip, r_hip});

  // Side: sagittal plane holding the spine direction and the frontal normal.
  const Vec3 mid_sh = 0.5 * (l_sh + r_sh);
  const Vec3 spine = mid_sh - pelvis;
  const Vec3 spine_in_plane = spine - spine.dot(f) * f;
  if (spine_in_plane.norm() <= kDegenerate) {
    throw DegenerateGeometry("build_planes: spine is parallel to the frontal normal");
  }
  const Vec3 s = orient(f.cross(spine_in_plane).normalized(), l_sh - r_sh);
  planes.side = make_plane(s, pelvis, {pelvis, mid_sh});

  // Cross-section: transverse plane through the pelvis along the hip axis.
  const Vec3 hip_axis = l_hip - r_hip;
  const Vec3 c_raw = hip_axis.cross(f);
  if (c_raw.norm() <= kDegenerate * std::max(1.0, hip_axis.norm())) {
    throw DegenerateGeometry("build_planes: hip axis is degenerate");
  }
  const Vec3 c = orient(c_raw.normalized(), neck - pelvis);
  planes.cross_section = make_plane(c, pelvis, {l_hip, r_hip, pelvis});
  return planes;
}

MatX3 part_centers(const MatX3& vertices, const PartAssignment& assignment) {
  assignment.validate(vertices.rows());
  MatX3 sums = MatX3::Zero(kNumJoints, 3);
  std::vector<int> counts(kNumJoints, 0);
  for (Index i = 0; i < vertices.rows(); ++i) {
    const int p = assignment.part_of_vertex[i];
    sums.row(p) += vertices.row(i);
    ++counts[p];
  }
  for (int p = 0; p < kNumJoints; ++p) {
    if (counts[p] == 0) throw EmptyPart("part_centers: part " + std::to_string(p) + " is empty");
    sums.row(p) /= static_cast<double>(counts[p]);
  }
  return sums;
}

RelativeDepth relative_depth(const ReferencePlanes& planes, const MatX3& centers) {
  require(centers.rows() == kNumJoints, "relative_depth: expected 24 centers");
  RelativeDepth out;
  for (int p = 0; p < kNumJoints; ++p) {
    for (int k = 0; k < 3; ++k) out.rd(p, k) = planes[k].signed_distance(row(centers, p));
  }
  return out;
}

RelativeDepth ground_truth_rd(const BodyTemplate& tmpl, const PoseShape& ps,
                              const PartAssignment& assignment, PlaneSource source,
                              const Vec3& trans) {
  const PosedBody body = forward(tmpl, ps, trans);
  const MatX3 centers = part_centers(body.vertices, assignment);
  const ReferencePlanes planes =
      build_planes(source == PlaneSource::kJoints ? body.joints3d : centers);
  return relative_depth(planes, centers);
}

}  // namespace partreg
