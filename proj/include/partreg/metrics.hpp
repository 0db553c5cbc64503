#pragma once

#include <map>
#include <optional>
#include <utility>
#include <string>
#include <vector>

#include "partreg/common.hpp"

namespace partreg {

using JointMask = std::vector<bool>;

JointMask all_joints_mask(int num_joints = kNumJoints);

/// 14 joints shared by the common 2D/3D benchmarks: ankles, knees, hips,
/// wrists, elbows, shoulders, neck, head.
JointMask common14_mask();

/// Looks up "all24" or "common14"; throws InvalidArgument otherwise.
JointMask mask_preset(const std::string& name);

struct MetricOptions {
  bool root_align = true;
  int root_joint = kPelvis;
};

/// Mean Euclidean joint error in millimetres over the masked joints. Inputs in metres.
double mje(const MatX3& pred, const MatX3& gt, const JointMask& mask,
           const MetricOptions& opt = {});

struct AlignmentResult {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  MatX3 aligned;
};

/// Similarity transform minimizing Σ ||s R pred_j + t - gt_j||², reflection-free.
/// Throws DegenerateGeometry for fewer than 3 points or a rank < 2 configuration.
AlignmentResult procrustes_align(const MatX3& pred, const MatX3& gt);

/// MJE after aligning the masked joints with procrustes_align.
double pamje(const MatX3& pred, const MatX3& gt, const JointMask& mask);

/// Mean per-vertex error in millimetres. When `roots` is given, each mesh is
/// first translated by minus its root position.
double pve(const MatX3& pred_vertices, const MatX3& gt_vertices,
           const std::optional<std::pair<Vec3, Vec3>>& roots = std::nullopt);

/// Mean absolute error per axis (x, y, z) in millimetres.
Vec3 axis_mje(const MatX3& pred, const MatX3& gt, const JointMask& mask,
              const MetricOptions& opt = {});

/// Named joint groups with left/right pooled.
using PartGroups = std::vector<std::pair<std::string, std::vector<int>>>;
const PartGroups& default_part_groups();

std::map<std::string, double> per_part_mje(const MatX3& pred, const MatX3& gt,
                                           const PartGroups& groups = default_part_groups(),
                                           const MetricOptions& opt = {});

struct MetricReport {
  double mje = 0.0;
  double pamje = 0.0;
  double pve = 0.0;
  Vec3 axis_mje = Vec3::Zero();
  std::map<std::string, double> per_part_mje;
  int n_samples = 0;
};

struct EvalSample {
  MatX3 pred_joints;
  MatX3 gt_joints;
  MatX3 pred_vertices;
  MatX3 gt_vertices;
};

struct EvalOptions {
  JointMask mask = all_joints_mask();
  bool root_align = true;
  bool procrustes = true;  // compute PAMJE
};

MetricReport evaluate_sample(const EvalSample& s, const EvalOptions& opt);

/// Arithmetic mean of per-sample reports, summed in input order.
MetricReport aggregate_reports(const std::vector<MetricReport>& reports);

}  // namespace partreg
