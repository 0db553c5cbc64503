#pragma once

#include <vector>

#include "partreg/body_model.hpp"
#include "partreg/common.hpp"

namespace partreg {

/// Oriented plane n·x + d = 0 with unit n.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::vector<Vec3> points;  // defining points

  double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

/// Torso planes. Orientation:
///   frontal: positive in front of the body, i.e. along
///            (left_shoulder - right_shoulder) × (neck - pelvis);
///   side:    positive toward the left shoulder;
///   cross:   positive toward the neck.
struct ReferencePlanes {
  Plane frontal;
  Plane side;
  Plane cross_section;

  const Plane& operator[](int k) const;
};

/// Part index (0..23) for every vertex.
struct PartAssignment {
  std::vector<int> part_of_vertex;

  /// Throws InvalidArgument if the size or any index is out of range.
  void validate(Index num_vertices) const;
};

/// Signed distances (meters) of each part center to (frontal, side, cross-section).
struct RelativeDepth {
  Eigen::Matrix<double, kNumJoints, 3> rd = Eigen::Matrix<double, kNumJoints, 3>::Zero();
};

/// Argmax of each blend-weight row, ties to the lower part index.
PartAssignment assign_parts(const MatX& blend_weights);

/// Builds the torso planes from 24 SMPL-ordered points (joints or part centers).
///
/// - frontal: total-least-squares plane of both shoulders and both hips;
/// - side: contains the pelvis and the shoulder midpoint, normal orthogonal to
///   the frontal normal;
/// - cross-section: through the pelvis, spanned by the hip axis and the frontal
///   normal.
///
/// Throws DegenerateGeometry when a defining configuration is within 1e-9 of
/// collinear.
ReferencePlanes build_planes(const MatX3& joints3d);

/// Per-part vertex means. Throws EmptyPart if some part owns no vertex.
MatX3 part_centers(const MatX3& vertices, const PartAssignment& assignment);

RelativeDepth relative_depth(const ReferencePlanes& planes, const MatX3& centers);

enum class PlaneSource {
  kJoints,       // regressed joints of the posed body
  kPartCenters,  // part centers at the same SMPL indices
};

/// forward -> part_centers -> build_planes -> relative_depth.
RelativeDepth ground_truth_rd(const BodyTemplate& tmpl, const PoseShape& ps,
                              const PartAssignment& assignment,
                              PlaneSource source = PlaneSource::kJoints,
                              const Vec3& trans = Vec3::Zero());

}  // namespace partreg
