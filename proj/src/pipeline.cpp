#include "partreg/pipeline.hpp"

#include <algorithm>

#include "partreg/rng.hpp"

namespace partreg {

WeakPerspectiveCamera fit_front_camera(const MatX3& vertices, int height, int width) {
  require(height >= 1 && width >= 1, "fit_front_camera: image size must be positive");
  require(vertices.rows() > 0, "fit_front_camera: no vertices");
  const Vec3 lo = vertices.colwise().minCoeff();
  const Vec3 hi = vertices.colwise().maxCoeff();
  const double extent = std::max(hi.x() - lo.x(), hi.y() - lo.y());
  if (!(extent > 0.0)) throw DegenerateGeometry("fit_front_camera: mesh has zero extent");
  const double s = 0.9 * std::min(height, width) / extent;
  const Vec3 mid = 0.5 * (lo + hi);
  // front_view maps (x, y) to (s x + tx, -s y + ty).
  const Vec2 t(0.5 * width - s * mid.x(), 0.5 * height + s * mid.y());
  return WeakPerspectiveCamera::front_view(s, t);
}

GroundTruth make_ground_truth(const BodyTemplate& tmpl, const PartAssignment& assignment,
                              const PoseShape& pose, const Vec3& trans,
                              const WeakPerspectiveCamera& cam, int height, int width) {
  const PosedBody body = forward(tmpl, pose, trans);
  GroundTruth gt;
  const Index nj = body.joints3d.rows();
  gt.j2d = {project(cam, body.joints3d), VecX::Ones(nj)};
  gt.j3d = {body.joints3d, VecX::Ones(nj)};
  gt.pose = pose;
  gt.rd = ground_truth_rd(tmpl, pose, assignment, PlaneSource::kJoints, trans);
  const SegmentationMap parts = rasterize_parts(body, tmpl.faces, assignment, cam, height, width);
  gt.part_seg = parts;
  gt.body_seg = body_mask(parts);
  return gt;
}

namespace {

FeatureMap gaussian_map(Rng& rng, int h, int w, int c) {
  FeatureMap fm(h, w, c);
  for (double& x : fm.data) x = rng.normal();
  return fm;
}

}  // namespace

BackboneOutput synthetic_backbone(const SegmentationMap& parts, int channels, std::uint64_t seed,
                                  double logit_scale) {
  require(channels >= 1, "synthetic_backbone: channels must be positive");
  const int h = parts.height, w = parts.width;
  BackboneOutput b;
  b.att_body = FeatureMap(h, w, 1);
  b.att_part = FeatureMap(h, w, kNumJoints);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = parts.at(y, x);
      require(l >= 0 && l <= kNumJoints, "synthetic_backbone: label out of range");
      if (l > 0) {
        b.att_body.at(y, x, 0) = logit_scale;
        b.att_part.at(y, x, l - 1) = logit_scale;
      }
    }
  }
  Rng rng(seed);
  b.f2d = gaussian_map(rng, h, w, channels);
  b.f3d = gaussian_map(rng, h, w, channels);
  b.f_part = gaussian_map(rng, h, w, channels);
  return b;
}

TokenSet backbone_tokens(const BackboneOutput& b) {
  const VecX brf = body_reference_feature(b.att_body, b.f2d, b.f3d);
  const MatX pqf = part_query_features(b.att_part, b.f_part);
  return make_tokens(pqf, brf);
}

Predictions predict(const BodyAwareModel& model, const BodyTemplate& tmpl,
                    const BackboneOutput& backbone, Regression* regression) {
  const Regression reg = run_model(model, backbone_tokens(backbone));
  const PosedBody body = forward(tmpl, reg.pose);
  Predictions p;
  p.j3d = body.joints3d;
  p.j2d = project(reg.camera, body.joints3d);
  p.aux_j2d = p.j2d;
  p.aux_j3d = p.j3d;
  p.pose = reg.pose;
  p.rd = reg.rd;
  p.body_logits = with_background(backbone.att_body);
  p.part_logits = with_background(backbone.att_part);
  if (regression != nullptr) *regression = reg;
  return p;
}

}  // namespace partreg
