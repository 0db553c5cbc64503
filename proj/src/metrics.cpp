#include "partreg/metrics.hpp"

#include <Eigen/SVD>

namespace partreg {

namespace {

constexpr double kMm = 1000.0;

void check_pair(const MatX3& pred, const MatX3& gt, const JointMask& mask) {
  require(pred.rows() == gt.rows(), "metric: prediction and ground truth sizes differ");
  require(static_cast<Index>(mask.size()) == pred.rows(), "metric: mask length mismatch");
  require(pred.allFinite() && gt.allFinite(), "metric: non-finite coordinates");
  bool any = false;
  for (bool m : mask) any = any || m;
  require(any, "metric: empty joint mask");
}

// Residuals (pred - gt) after optional root alignment.
MatX3 residuals(const MatX3& pred, const MatX3& gt, const MetricOptions& opt) {
  MatX3 d = pred - gt;
  if (opt.root_align) {
    require(opt.root_joint >= 0 && opt.root_joint < pred.rows(), "metric: root joint out of range");
    const Eigen::RowVector3d root = d.row(opt.root_joint);
    d.rowwise() -= root;
  }
  return d;
}

MatX3 select_rows(const MatX3& m, const JointMask& mask) {
  Index n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  MatX3 out(n, 3);
  Index r = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    if (mask[i]) out.row(r++) = m.row(i);
  }
  return out;
}

}  // namespace

JointMask all_joints_mask(int num_joints) { return JointMask(num_joints, true); }

JointMask common14_mask() {
  JointMask m(kNumJoints, false);
  for (int j : {kLeftAnkle, kRightAnkle, kLeftKnee, kRightKnee, kLeftHip, kRightHip, kLeftWrist,
                kRightWrist, kLeftElbow, kRightElbow, kLeftShoulder, kRightShoulder, kNeck, kHead}) {
    m[j] = true;
  }
  return m;
}

JointMask mask_preset(const std::string& name) {
  if (name == "all24") return all_joints_mask();
  if (name == "common14") return common14_mask();
  throw InvalidArgument("unknown joint mask preset '" + name + "' (expected all24 or common14)");
}

double mje(const MatX3& pred, const MatX3& gt, const JointMask& mask, const MetricOptions& opt) {
  check_pair(pred, gt, mask);
  const MatX3 d = residuals(pred, gt, opt);
  double total = 0.0;
  int n = 0;
  for (Index j = 0; j < d.rows(); ++j) {
    if (!mask[j]) continue;
    total += d.row(j).norm();
    ++n;
  }
  return kMm * total / n;
}

AlignmentResult procrustes_align(const MatX3& pred, const MatX3& gt) {
  require(pred.rows() == gt.rows(), "procrustes_align: point counts differ");
  if (pred.rows() < 3) throw DegenerateGeometry("procrustes_align: need at least 3 points");
  const Eigen::RowVector3d mu_p = pred.colwise().mean();
  const Eigen::RowVector3d mu_g = gt.colwise().mean();
  const MatX3 x = pred.rowwise() - mu_p;
  const MatX3 y = gt.rowwise() - mu_g;

  const Vec3 sx = Eigen::JacobiSVD<MatX3>(x).singularValues();
  if (!(sx[1] > 1e-9 * std::max(1.0, sx[0]))) {
    throw DegenerateGeometry("procrustes_align: prediction is collinear or a single point");
  }

  const Mat3 cov = x.transpose() * y;  // Σ x_i y_i^T
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 d = Vec3::Ones();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d[2] = -1.0;

  AlignmentResult r;
  r.rotation = svd.matrixV() * d.asDiagonal() * svd.matrixU().transpose();
  r.scale = svd.singularValues().dot(d) / x.squaredNorm();
  r.translation = mu_g.transpose() - r.scale * r.rotation * mu_p.transpose();
  r.aligned = (r.scale * (pred * r.rotation.transpose())).rowwise() + r.translation.transpose();
  return r;
}

double pamje(const MatX3& pred, const MatX3& gt, const JointMask& mask) {
  check_pair(pred, gt, mask);
  const MatX3 p = select_rows(pred, mask);
  const MatX3 g = select_rows(gt, mask);
  const AlignmentResult a = procrustes_align(p, g);
  return kMm * (a.aligned - g).rowwise().norm().mean();
}

double pve(const MatX3& pred_vertices, const MatX3& gt_vertices,
           const std::optional<std::pair<Vec3, Vec3>>& roots) {
  require(pred_vertices.rows() == gt_vertices.rows() && pred_vertices.rows() > 0,
          "pve: vertex counts differ or are zero");
  MatX3 d = pred_vertices - gt_vertices;
  if (roots) d.rowwise() -= (roots->first - roots->second).transpose();
  return kMm * d.rowwise().norm().mean();
}

Vec3 axis_mje(const MatX3& pred, const MatX3& gt, const JointMask& mask, const MetricOptions& opt) {
  check_pair(pred, gt, mask);
  const MatX3 d = residuals(pred, gt, opt);
  Vec3 total = Vec3::Zero();
  int n = 0;
  for (Index j = 0; j < d.rows(); ++j) {
    if (!mask[j]) continue;
    total += d.row(j).cwiseAbs().transpose();
    ++n;
  }
  return kMm * total / n;
}

const PartGroups& default_part_groups() {
  static const PartGroups groups = {
      {"Elbow", {kLeftElbow, kRightElbow}},
      {"Wrist", {kLeftWrist, kRightWrist}},
      {"Head", {kHead}},
      {"Knee", {kLeftKnee, kRightKnee}},
      {"Ankle", {kLeftAnkle, kRightAnkle}},
      {"Hip", {kLeftHip, kRightHip}},
      {"Neck", {kNeck}},
      {"Shoulder", {kLeftShoulder, kRightShoulder}},
  };
  return groups;
}

std::map<std::string, double> per_part_mje(const MatX3& pred, const MatX3& gt,
                                           const PartGroups& groups, const MetricOptions& opt) {
  std::map<std::string, double> out;
  for (const auto& [name, joints] : groups) {
    JointMask mask(pred.rows(), false);
    for (int j : joints) {
      require(j >= 0 && j < pred.rows(), "per_part_mje: joint index out of range");
      mask[j] = true;
    }
    out[name] = mje(pred, gt, mask, opt);
  }
  return out;
}

MetricReport evaluate_sample(const EvalSample& s, const EvalOptions& opt) {
  const MetricOptions mo{opt.root_align, kPelvis};
  MetricReport r;
  r.n_samples = 1;
  r.mje = mje(s.pred_joints, s.gt_joints, opt.mask, mo);
  r.pamje = opt.procrustes ? pamje(s.pred_joints, s.gt_joints, opt.mask) : 0.0;
  std::optional<std::pair<Vec3, Vec3>> roots;
  if (opt.root_align) {
    roots = std::make_pair(Vec3(s.pred_joints.row(kPelvis).transpose()),
                           Vec3(s.gt_joints.row(kPelvis).transpose()));
  }
  r.pve = pve(s.pred_vertices, s.gt_vertices, roots);
  r.axis_mje = axis_mje(s.pred_joints, s.gt_joints, opt.mask, mo);
  r.per_part_mje = per_part_mje(s.pred_joints, s.gt_joints, default_part_groups(), mo);
  return r;
}

MetricReport aggregate_reports(const std::vector<MetricReport>& reports) {
  require(!reports.empty(), "aggregate_reports: no samples");
  MetricReport m;
  for (const auto& r : reports) {
    m.mje += r.mje;
    m.pamje += r.pamje;
    m.pve += r.pve;
    m.axis_mje += r.axis_mje;
    for (const auto& [k, v] : r.per_part_mje) m.per_part_mje[k] += v;
    m.n_samples += r.n_samples;
  }
  const double n = static_cast<double>(reports.size());
  m.mje /= n;
  m.pamje /= n;
  m.pve /= n;
  m.axis_mje /= n;
  for (auto& [k, v] : m.per_part_mje) v /= n;
  return m;
}

}  // namespace partreg
