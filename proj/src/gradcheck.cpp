#include "partreg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "partreg/attention.hpp"
#include "partreg/camera.hpp"
#include "partreg/losses.hpp"
#include "partreg/rng.hpp"
#include "partreg/rotation.hpp"

namespace partreg {

double grad_check(const ScalarFn& f, const VecX& x, const VecX& grad, const GradCheckOptions& opt) {
  require(opt.step > 0.0, "grad_check: step must be positive");
  require(grad.size() == x.size(), "grad_check: gradient size mismatch");
  const double h = opt.step;
  const Index n = opt.directions > 0 ? opt.directions : x.size();
  VecX analytic(n), numeric(n);
  Rng rng(opt.seed);
  VecX xp = x;
  for (Index k = 0; k < n; ++k) {
    if (opt.directions > 0) {
      VecX d(x.size());
      for (Index i = 0; i < d.size(); ++i) d[i] = rng.normal();
      d /= d.norm();
      analytic[k] = grad.dot(d);
      numeric[k] = (f(x + h * d) - f(x - h * d)) / (2.0 * h);
    } else {
      analytic[k] = grad[k];
      xp[k] = x[k] + h;
      const double fp = f(xp);
      xp[k] = x[k] - h;
      const double fm = f(xp);
      xp[k] = x[k];
      numeric[k] = (fp - fm) / (2.0 * h);
    }
  }
  const double denom = std::max(analytic.norm(), numeric.norm());
  if (denom == 0.0) return 0.0;
  return (analytic - numeric).norm() / denom;
}

namespace {

// Parameter blocks flattened column-major into one vector.
class Blocks {
 public:
  Index add(const MatX& m) {
    shapes_.emplace_back(m.rows(), m.cols());
    parts_.push_back(m);
    return static_cast<Index>(parts_.size()) - 1;
  }

  VecX flatten(const std::vector<MatX>& parts) const {
    Index total = 0;
    for (const auto& p : parts) total += p.size();
    VecX x(total);
    Index o = 0;
    for (const auto& p : parts) {
      x.segment(o, p.size()) = Eigen::Map<const VecX>(p.data(), p.size());
      o += p.size();
    }
    return x;
  }
  VecX flatten() const { return flatten(parts_); }

  std::vector<MatX> unflatten(const VecX& x) const {
    std::vector<MatX> out;
    Index o = 0;
    for (const auto& [r, c] : shapes_) {
      out.emplace_back(Eigen::Map<const MatX>(x.data() + o, r, c));
      o += r * c;
    }
    return out;
  }

 private:
  std::vector<std::pair<Index, Index>> shapes_;
  std::vector<MatX> parts_;
};

MatX random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  MatX m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

double weighted_sum(const MatX& g, const MatX& out) { return (g.array() * out.array()).sum(); }

FeatureMap to_map(const MatX& m, int h, int w, int c) {
  FeatureMap fm(h, w, c);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(fm.data.data(),
                                                                                    h * w, c) = m;
  return fm;
}

MatX from_map(const FeatureMap& fm) { return fm.as_matrix(); }

struct Instance {
  ScalarFn f;
  VecX x;
  VecX grad;
};

Instance aggregate_instance(Rng& rng) {
  const int h = 3, w = 4, k = 2, c = 3;
  Blocks b;
  b.add(random_matrix(rng, h * w, k));
  b.add(random_matrix(rng, h * w, c));
  const MatX g = random_matrix(rng, k, c);
  const auto unpack = [=](const VecX& x) {
    const auto p = b.unflatten(x);
    return std::pair{to_map(p[0], h, w, k), to_map(p[1], h, w, c)};
  };
  Instance in;
  in.x = b.flatten();
  in.f = [=](const VecX& x) {
    const auto [att, feat] = unpack(x);
    return weighted_sum(g, aggregate(att, feat));
  };
  const auto [att, feat] = unpack(in.x);
  const AggregateGrad ag = aggregate_backward(att, feat, g);
  in.grad = b.flatten({from_map(ag.logits), from_map(ag.features)});
  return in;
}

AttentionBlockParams block_from(const std::vector<MatX>& p, int heads, ScaleMode scale) {
  AttentionBlockParams bp;
  bp.wq = p[1];
  bp.wk = p[2];
  bp.wv = p[3];
  bp.ln1 = {p[4].col(0), p[5].col(0)};
  bp.ln2 = {p[6].col(0), p[7].col(0)};
  bp.heads = heads;
  bp.scale = scale;
  return bp;
}

Instance attention_instance(Rng& rng, int heads, ScaleMode scale) {
  const Index n = 5, d = 6, dk = 4;
  Blocks b;
  b.add(random_matrix(rng, n, d));
  b.add(random_matrix(rng, d, dk, 0.5));
  b.add(random_matrix(rng, d, dk, 0.5));
  b.add(random_matrix(rng, d, d, 0.5));
  b.add(VecX::Ones(d) + random_matrix(rng, d, 1, 0.2));
  b.add(random_matrix(rng, d, 1, 0.2));
  b.add(VecX::Ones(d) + random_matrix(rng, d, 1, 0.2));
  b.add(random_matrix(rng, d, 1, 0.2));
  const MatX g = random_matrix(rng, n, d);
  Instance in;
  in.x = b.flatten();
  in.f = [=](const VecX& x) {
    const auto p = b.unflatten(x);
    return weighted_sum(g, attention_block(p[0], block_from(p, heads, scale)));
  };
  const auto p = b.unflatten(in.x);
  const AttentionBlockGrad ag = attention_block_backward(p[0], block_from(p, heads, scale), g);
  in.grad = b.flatten({ag.tokens, ag.wq, ag.wk, ag.wv, ag.ln1.gain, ag.ln1.bias, ag.ln2.gain,
                       ag.ln2.bias});
  return in;
}

Instance layer_norm_instance(Rng& rng) {
  const Index n = 4, d = 7;
  Blocks b;
  b.add(random_matrix(rng, n, d));
  b.add(VecX::Ones(d) + random_matrix(rng, d, 1, 0.3));
  b.add(random_matrix(rng, d, 1, 0.3));
  const MatX g = random_matrix(rng, n, d);
  Instance in;
  in.x = b.flatten();
  in.f = [=](const VecX& x) {
    const auto p = b.unflatten(x);
    return weighted_sum(g, layer_norm(p[0], {p[1].col(0), p[2].col(0)}));
  };
  const auto p = b.unflatten(in.x);
  const LayerNormGrad lg = layer_norm_backward(p[0], {p[1].col(0), p[2].col(0)}, g);
  in.grad = b.flatten({lg.x, lg.gain, lg.bias});
  return in;
}

Instance projection_instance(Rng& rng) {
  const Index n = 6;
  WeakPerspectiveCamera cam;
  cam.R = rodrigues(Vec3(rng.normal(), rng.normal(), rng.normal()));
  Blocks b;
  b.add(random_matrix(rng, n, 3));
  b.add(MatX::Constant(1, 1, rng.uniform(0.5, 2.0)));
  b.add(random_matrix(rng, 2, 1));
  const MatX g = random_matrix(rng, n, 2);
  const auto camera_of = [cam](const std::vector<MatX>& p) {
    WeakPerspectiveCamera c = cam;
    c.s = p[1](0, 0);
    c.t = p[2].col(0);
    return c;
  };
  Instance in;
  in.x = b.flatten();
  in.f = [=](const VecX& x) {
    const auto p = b.unflatten(x);
    return weighted_sum(g, project(camera_of(p), p[0]));
  };
  const auto p = b.unflatten(in.x);
  const ProjectGrad pg = project_backward(camera_of(p), p[0], g);
  in.grad = b.flatten({pg.points, MatX::Constant(1, 1, pg.s), pg.t});
  return in;
}

KeypointSet random_keypoints(Rng& rng, Index dim) {
  KeypointSet k{random_matrix(rng, kNumJoints, dim), VecX(kNumJoints)};
  for (Index j = 0; j < kNumJoints; ++j) k.confidence[j] = j % 5 == 0 ? 0.0 : rng.uniform();
  return k;
}

Instance keypoint_instance(Rng& rng, Index dim) {
  const KeypointSet gt = random_keypoints(rng, dim);
  const MatX pred0 = random_matrix(rng, kNumJoints, dim);
  const double lambda = rng.uniform(0.5, 5.0);
  Instance in;
  in.x = Eigen::Map<const VecX>(pred0.data(), pred0.size());
  in.f = [=](const VecX& x) {
    return keypoint_loss(Eigen::Map<const MatX>(x.data(), kNumJoints, dim), gt, lambda);
  };
  const MatX g = keypoint_loss_grad(pred0, gt, lambda);
  in.grad = Eigen::Map<const VecX>(g.data(), g.size());
  return in;
}

PoseShape random_pose(Rng& rng) {
  PoseShape ps = PoseShape::zero();
  ps.theta = random_matrix(rng, kNumJoints, 3, 0.6);
  ps.beta = random_matrix(rng, kNumBetas, 1).col(0);
  return ps;
}

Instance smpl_instance(Rng& rng) {
  const PoseShape gt = random_pose(rng);
  const PoseShape pred = random_pose(rng);
  const double lambda = rng.uniform(0.5, 2.0);
  Blocks b;
  b.add(pred.theta);
  b.add(pred.beta);
  const auto unpack = [=](const VecX& x) {
    const auto p = b.unflatten(x);
    PoseShape ps;
    ps.theta = p[0];
    ps.beta = p[1].col(0);
    return ps;
  };
  Instance in;
  in.x = b.flatten();
  in.f = [=](const VecX& x) { return smpl_param_loss(unpack(x), gt, lambda); };
  const PoseShapeGrad g = smpl_param_loss_grad(pred, gt, lambda);
  in.grad = b.flatten({g.theta, g.beta});
  return in;
}

Instance rd_instance(Rng& rng) {
  RelativeDepth gt, pred;
  gt.rd = random_matrix(rng, kNumJoints, 3, 0.3);
  pred.rd = random_matrix(rng, kNumJoints, 3, 0.3);
  const double lambda = rng.uniform(0.5, 2.0);
  Instance in;
  const MatX p0 = pred.rd;
  in.x = Eigen::Map<const VecX>(p0.data(), p0.size());
  in.f = [=](const VecX& x) {
    RelativeDepth r;
    r.rd = Eigen::Map<const MatX>(x.data(), kNumJoints, 3);
    return rd_loss(r, gt, lambda);
  };
  const MatX g = rd_loss_grad(pred, gt, lambda);
  in.grad = Eigen::Map<const VecX>(g.data(), g.size());
  return in;
}

Instance seg_instance(Rng& rng, int channels) {
  const int h = 3, w = 4;
  LabelMap labels{h, w, std::vector<int>(static_cast<std::size_t>(h) * w)};
  for (int& l : labels.labels) l = static_cast<int>(rng.next() % static_cast<std::uint64_t>(channels));
  const MatX logits0 = random_matrix(rng, h * w, channels, 2.0);
  Instance in;
  in.x = Eigen::Map<const VecX>(logits0.data(), logits0.size());
  in.f = [=](const VecX& x) {
    return seg_loss(to_map(Eigen::Map<const MatX>(x.data(), h * w, channels), h, w, channels), labels);
  };
  const MatX g = from_map(seg_loss_grad(to_map(logits0, h, w, channels), labels));
  in.grad = Eigen::Map<const VecX>(g.data(), g.size());
  return in;
}

}  // namespace

std::vector<OpCheck> run_gradient_suite(std::uint64_t seed, int instances) {
  require(instances >= 1, "run_gradient_suite: need at least one instance");
  using Maker = std::function<Instance(Rng&)>;
  const std::vector<std::pair<std::string, Maker>> ops = {
      {"aggregate", aggregate_instance},
      {"attention_block", [](Rng& r) { return attention_instance(r, 1, ScaleMode::kKeyDim); }},
      {"attention_block_seqlen",
       [](Rng& r) { return attention_instance(r, 1, ScaleMode::kSequenceLength); }},
      {"attention_block_2head", [](Rng& r) { return attention_instance(r, 2, ScaleMode::kKeyDim); }},
      {"layer_norm", layer_norm_instance},
      {"project", projection_instance},
      {"loss_2d", [](Rng& r) { return keypoint_instance(r, 2); }},
      {"loss_3d", [](Rng& r) { return keypoint_instance(r, 3); }},
      {"loss_smpl", smpl_instance},
      {"loss_rd", rd_instance},
      {"loss_bseg", [](Rng& r) { return seg_instance(r, 2); }},
      {"loss_pseg", [](Rng& r) { return seg_instance(r, kNumSegClasses); }},
  };
  std::vector<OpCheck> out;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    OpCheck check{ops[k].first, 0.0, instances};
    for (int i = 0; i < instances; ++i) {
      Rng rng(seed * 1'000'003ULL + k * 1009ULL + static_cast<std::uint64_t>(i));
      const Instance in = ops[k].second(rng);
      check.max_rel_error = std::max(check.max_rel_error, grad_check(in.f, in.x, in.grad));
    }
    out.push_back(check);
  }
  return out;
}

std::vector<OpCheck> check_model_blocks(const BodyAwareModel& model, std::uint64_t seed,
                                        int directions) {
  require(directions >= 1, "check_model_blocks: need at least one direction");
  const std::vector<std::pair<std::string, const AttentionBlockParams*>> blocks = {
      {"encoder.0", &model.encoder[0]},
      {"encoder.1", &model.encoder[1]},
      {"head.block", &model.head.block}};
  std::vector<OpCheck> out;
  Rng rng(seed);
  for (const auto& [name, params] : blocks) {
    params->validate();
    const MatX tokens = random_matrix(rng, kNumJoints, params->model_dim());
    const MatX g = random_matrix(rng, kNumJoints, params->model_dim());
    const AttentionBlockParams p = *params;
    const ScalarFn f = [&](const VecX& x) {
      return weighted_sum(g, attention_block(Eigen::Map<const MatX>(x.data(), tokens.rows(), tokens.cols()), p));
    };
    const MatX grad = attention_block_backward(tokens, p, g).tokens;
    GradCheckOptions opt;
    opt.directions = directions;
    opt.seed = rng.next();
    const double err = grad_check(f, Eigen::Map<const VecX>(tokens.data(), tokens.size()),
                                  Eigen::Map<const VecX>(grad.data(), grad.size()), opt);
    out.push_back({"checkpoint." + name, err, 1});
  }
  return out;
}

}  // namespace partreg
