#pragma once

#include <optional>
#include <vector>

#include "partreg/attention.hpp"
#include "partreg/body_model.hpp"
#include "partreg/common.hpp"
#include "partreg/ref_planes.hpp"

namespace partreg {

struct LossWeights {
  double lambda_2d = 5.0;
  double lambda_3d = 5.0;
  double lambda_smpl = 1.0;
  double lambda_rd = 1.0;
  double lambda_att = 1.0;

  void validate() const;
};

/// Ground-truth keypoints (J×2 or J×3) with per-joint confidence in [0, 1].
struct KeypointSet {
  MatX coords;
  VecX confidence;

  void validate() const;
};

/// Per-term values. l_bseg and l_pseg are unweighted cross-entropies; the
/// other terms already include their lambda.
struct LossReport {
  double l_2d = 0.0;
  double l_3d = 0.0;
  double l_smpl = 0.0;
  double l_rd = 0.0;
  double l_bseg = 0.0;
  double l_pseg = 0.0;
  double l_aux2d = 0.0;
  double l_aux3d = 0.0;
  double l_afe = 0.0;
  double l_bar = 0.0;
  double l_total = 0.0;
};

/// λ · Σ_j conf_j · ||pred_j - gt_j||².
double keypoint_loss(const MatX& pred, const KeypointSet& gt, double lambda);
MatX keypoint_loss_grad(const MatX& pred, const KeypointSet& gt, double lambda);

/// λ · (Σ_j ||R(θ_j) - R(θ̂_j)||_F² + ||β - β̂||²).
double smpl_param_loss(const PoseShape& pred, const PoseShape& gt, double lambda);

struct PoseShapeGrad {
  MatX3 theta;
  VecX beta;
};
PoseShapeGrad smpl_param_loss_grad(const PoseShape& pred, const PoseShape& gt, double lambda);

double rd_loss(const RelativeDepth& pred, const RelativeDepth& gt, double lambda);
Eigen::Matrix<double, kNumJoints, 3> rd_loss_grad(const RelativeDepth& pred,
                                                  const RelativeDepth& gt, double lambda);

/// Segmentation labels, 0 = background.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int> labels;  // row-major

  int at(int h, int w) const { return labels[static_cast<std::size_t>(h) * width + w]; }
};

/// Mean over pixels of the cross-entropy of softmax(logits[h,w,:]) against the
/// label. logits carries one channel per class, background first.
double seg_loss(const AttentionMap& logits, const LabelMap& labels);
FeatureMap seg_loss_grad(const AttentionMap& logits, const LabelMap& labels);

/// Prepends a constant background logit channel; for a single foreground
/// channel the resulting 2-class softmax equals the sigmoid of the logit.
AttentionMap with_background(const AttentionMap& foreground, double background_logit = 0.0);

struct Predictions {
  MatX j2d;      // J×2
  MatX j3d;      // J×3
  MatX aux_j2d;  // J×2
  MatX aux_j3d;  // J×3
  PoseShape pose;
  RelativeDepth rd;
  std::optional<AttentionMap> body_logits;  // 2 channels
  std::optional<AttentionMap> part_logits;  // 25 channels
};

struct GroundTruth {
  KeypointSet j2d;
  KeypointSet j3d;
  PoseShape pose;
  RelativeDepth rd;
  std::optional<LabelMap> body_seg;
  std::optional<LabelMap> part_seg;
};

/// L_total = L_AFE + L_BAR with
///   L_AFE = L_aux2d + L_aux3d + λ_att (L_bseg + L_pseg)
///   L_BAR = L_2d + L_3d + L_smpl + L_rd.
/// A segmentation term is included only when both logits and labels are present.
LossReport total_loss(const Predictions& pred, const GroundTruth& gt, const LossWeights& w);

/// Field-wise mean over a batch.
LossReport mean_report(const std::vector<LossReport>& reports);

}  // namespace partreg
