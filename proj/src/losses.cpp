#include "partreg/losses.hpp"

#include <cmath>
#include <string>

#include "partreg/rotation.hpp"

namespace partreg {

void LossWeights::validate() const {
  for (double l : {lambda_2d, lambda_3d, lambda_smpl, lambda_rd, lambda_att}) {
    require(std::isfinite(l) && l >= 0.0, "loss weights must be finite and non-negative");
  }
}

void KeypointSet::validate() const {
  require(coords.rows() == confidence.size(), "keypoints: coords and confidence lengths differ");
  require(coords.allFinite(), "keypoints: non-finite coordinates");
  require((confidence.array() >= 0.0).all() && (confidence.array() <= 1.0).all(),
          "keypoints: confidence outside [0, 1]");
}

double keypoint_loss(const MatX& pred, const KeypointSet& gt, double lambda) {
  gt.validate();
  require(pred.rows() == gt.coords.rows() && pred.cols() == gt.coords.cols(),
          "keypoint_loss: prediction and ground truth shapes differ");
  double total = 0.0;
  for (Index j = 0; j < pred.rows(); ++j) {
    total += gt.confidence[j] * (pred.row(j) - gt.coords.row(j)).squaredNorm();
  }
  return lambda * total;
}

MatX keypoint_loss_grad(const MatX& pred, const KeypointSet& gt, double lambda) {
  gt.validate();
  require(pred.rows() == gt.coords.rows() && pred.cols() == gt.coords.cols(),
          "keypoint_loss_grad: shape mismatch");
  return 2.0 * lambda * (gt.confidence.asDiagonal() * (pred - gt.coords));
}

double smpl_param_loss(const PoseShape& pred, const PoseShape& gt, double lambda) {
  require(pred.theta.rows() == gt.theta.rows() && pred.beta.size() == gt.beta.size(),
          "smpl_param_loss: parameterizations differ");
  double total = (pred.beta - gt.beta).squaredNorm();
  for (Index j = 0; j < pred.theta.rows(); ++j) {
    total += (rodrigues(pred.theta.row(j).transpose()) - rodrigues(gt.theta.row(j).transpose()))
                 .squaredNorm();
  }
  return lambda * total;
}

PoseShapeGrad smpl_param_loss_grad(const PoseShape& pred, const PoseShape& gt, double lambda) {
  require(pred.theta.rows() == gt.theta.rows() && pred.beta.size() == gt.beta.size(),
          "smpl_param_loss_grad: parameterizations differ");
  PoseShapeGrad g{MatX3(pred.theta.rows(), 3), 2.0 * lambda * (pred.beta - gt.beta)};
  for (Index j = 0; j < pred.theta.rows(); ++j) {
    const Vec3 v = pred.theta.row(j).transpose();
    const Mat3 diff = rodrigues(v) - rodrigues(gt.theta.row(j).transpose());
    const auto jac = rodrigues_jacobian(v);
    for (int i = 0; i < 3; ++i) g.theta(j, i) = 2.0 * lambda * (diff.array() * jac[i].array()).sum();
  }
  return g;
}

double rd_loss(const RelativeDepth& pred, const RelativeDepth& gt, double lambda) {
  return lambda * (pred.rd - gt.rd).squaredNorm();
}

Eigen::Matrix<double, kNumJoints, 3> rd_loss_grad(const RelativeDepth& pred,
                                                  const RelativeDepth& gt, double lambda) {
  return 2.0 * lambda * (pred.rd - gt.rd);
}

namespace {

void check_seg_inputs(const AttentionMap& logits, const LabelMap& labels) {
  logits.validate();
  require(logits.height == labels.height && logits.width == labels.width,
          "seg_loss: logits and labels spatial sizes differ");
  require(labels.labels.size() == static_cast<std::size_t>(labels.height) * labels.width,
          "seg_loss: label map size does not match dimensions");
  for (int l : labels.labels) {
    if (l < 0 || l >= logits.channels) {
      throw InvalidArgument("seg_loss: label " + std::to_string(l) + " outside 0.." +
                            std::to_string(logits.channels - 1));
    }
  }
}

}  // namespace

double seg_loss(const AttentionMap& logits, const LabelMap& labels) {
  check_seg_inputs(logits, labels);
  const auto z = logits.as_matrix();
  double total = 0.0;
  for (int i = 0; i < logits.pixels(); ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    total += lse - z(i, labels.labels[i]);
  }
  return total / logits.pixels();
}

FeatureMap seg_loss_grad(const AttentionMap& logits, const LabelMap& labels) {
  check_seg_inputs(logits, labels);
  const auto z = logits.as_matrix();
  FeatureMap g(logits.height, logits.width, logits.channels);
  const double inv_n = 1.0 / logits.pixels();
  for (int i = 0; i < logits.pixels(); ++i) {
    const double m = z.row(i).maxCoeff();
    const Eigen::ArrayXd e = (z.row(i).array() - m).exp().transpose();
    const double total = e.sum();
    for (int k = 0; k < logits.channels; ++k) {
      const double target = labels.labels[i] == k ? 1.0 : 0.0;
      g.data[static_cast<std::size_t>(i) * logits.channels + k] = (e[k] / total - target) * inv_n;
    }
  }
  return g;
}

AttentionMap with_background(const AttentionMap& foreground, double background_logit) {
  AttentionMap bg(foreground.height, foreground.width, 1, background_logit);
  return concat_channels(bg, foreground);
}

LossReport total_loss(const Predictions& pred, const GroundTruth& gt, const LossWeights& w) {
  w.validate();
  LossReport r;
  r.l_2d = keypoint_loss(pred.j2d, gt.j2d, w.lambda_2d);
  r.l_3d = keypoint_loss(pred.j3d, gt.j3d, w.lambda_3d);
  r.l_aux2d = keypoint_loss(pred.aux_j2d, gt.j2d, w.lambda_2d);
  r.l_aux3d = keypoint_loss(pred.aux_j3d, gt.j3d, w.lambda_3d);
  r.l_smpl = smpl_param_loss(pred.pose, gt.pose, w.lambda_smpl);
  r.l_rd = rd_loss(pred.rd, gt.rd, w.lambda_rd);
  if (pred.body_logits && gt.body_seg) r.l_bseg = seg_loss(*pred.body_logits, *gt.body_seg);
  if (pred.part_logits && gt.part_seg) r.l_pseg = seg_loss(*pred.part_logits, *gt.part_seg);
  r.l_afe = r.l_aux2d + r.l_aux3d + w.lambda_att * (r.l_bseg + r.l_pseg);
  r.l_bar = r.l_2d + r.l_3d + r.l_smpl + r.l_rd;
  r.l_total = r.l_afe + r.l_bar;
  return r;
}

LossReport mean_report(const std::vector<LossReport>& reports) {
  require(!reports.empty(), "mean_report: empty batch");
  LossReport m;
  for (const auto& r : reports) {
    m.l_2d += r.l_2d;
    m.l_3d += r.l_3d;
    m.l_smpl += r.l_smpl;
    m.l_rd += r.l_rd;
    m.l_bseg += r.l_bseg;
    m.l_pseg += r.l_pseg;
    m.l_aux2d += r.l_aux2d;
    m.l_aux3d += r.l_aux3d;
    m.l_afe += r.l_afe;
    m.l_bar += r.l_bar;
    m.l_total += r.l_total;
  }
  const double n = static_cast<double>(reports.size());
  for (double* f : {&m.l_2d, &m.l_3d, &m.l_smpl, &m.l_rd, &m.l_bseg, &m.l_pseg, &m.l_aux2d,
                    &m.l_aux3d, &m.l_afe, &m.l_bar, &m.l_total}) {
    *f /= n;
  }
  m.l_total = m.l_afe + m.l_bar;
  return m;
}

}  // namespace partreg
