#include "partreg/transformer.hpp"

#include <cmath>
#include <string>

#include "partreg/rng.hpp"
#include "partreg/rotation.hpp"

namespace partreg {

namespace {

MatX row_softmax(const MatX& s) {
  MatX p(s.rows(), s.cols());
  for (Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    double total = 0.0;
    for (Index j = 0; j < s.cols(); ++j) {
      p(i, j) = std::exp(s(i, j) - m);
      total += p(i, j);
    }
    p.row(i) /= total;
  }
  return p;
}

MatX random_matrix(Rng& rng, Index rows, Index cols) {
  MatX m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-0.02, 0.02);
  }
  return m;
}

Linear random_linear(Rng& rng, Index in, Index out) {
  return {random_matrix(rng, in, out), VecX::Zero(out)};
}

}  // namespace

TokenSet make_tokens(const MatX& part_query, const VecX& body_reference) {
  require(part_query.rows() == kNumJoints, "make_tokens: expected 24 part-query rows");
  TokenSet t;
  t.tokens.resize(kNumJoints, part_query.cols() + body_reference.size());
  t.tokens.leftCols(part_query.cols()) = part_query;
  t.tokens.rightCols(body_reference.size()) = body_reference.transpose().replicate(kNumJoints, 1);
  require(t.tokens.allFinite(), "make_tokens: non-finite features");
  return t;
}

LayerNormParams LayerNormParams::identity(Index dim) {
  return {VecX::Ones(dim), VecX::Zero(dim)};
}

MatX layer_norm(const MatX& x, const LayerNormParams& p) {
  require(p.gain.size() == x.cols() && p.bias.size() == x.cols(), "layer_norm: width mismatch");
  MatX y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const auto centered = (x.row(i).array() - mean);
    const double var = centered.square().mean();
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    y.row(i) = (centered * inv_std * p.gain.transpose().array() + p.bias.transpose().array()).matrix();
  }
  return y;
}

LayerNormGrad layer_norm_backward(const MatX& x, const LayerNormParams& p, const MatX& grad_out) {
  require(grad_out.rows() == x.rows() && grad_out.cols() == x.cols(),
          "layer_norm_backward: shape mismatch");
  LayerNormGrad g{MatX(x.rows(), x.cols()), VecX::Zero(x.cols()), VecX::Zero(x.cols())};
  for (Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const Eigen::ArrayXd centered = (x.row(i).array() - mean).transpose();
    const double inv_std = 1.0 / std::sqrt(centered.square().mean() + kLayerNormEps);
    const Eigen::ArrayXd xhat = centered * inv_std;
    const Eigen::ArrayXd dy = grad_out.row(i).transpose().array();
    g.gain.array() += dy * xhat;
    g.bias.array() += dy;
    const Eigen::ArrayXd dxhat = dy * p.gain.array();
    g.x.row(i) = (inv_std * (dxhat - dxhat.mean() - xhat * (dxhat * xhat).mean())).matrix().transpose();
  }
  return g;
}

double AttentionBlockParams::scale_denominator(Index num_tokens) const {
  const double d = scale == ScaleMode::kKeyDim ? static_cast<double>(key_dim() / heads)
                                               : static_cast<double>(num_tokens);
  return std::sqrt(d);
}

void AttentionBlockParams::validate() const {
  const Index d = model_dim();
  require(heads >= 1, "attention block: heads must be positive");
  require(wq.rows() == d && wk.rows() == d, "attention block: Wq/Wk rows must equal model width");
  require(wq.cols() == wk.cols() && wq.cols() >= 1, "attention block: Wq and Wk widths differ");
  require(wv.cols() == d, "attention block: Wv must be D×D");
  require(wq.cols() % heads == 0 && d % heads == 0, "attention block: widths not divisible by heads");
  require(ln1.gain.size() == d && ln1.bias.size() == d && ln2.gain.size() == d &&
              ln2.bias.size() == d,
          "attention block: LayerNorm width mismatch");
  require(wq.allFinite() && wk.allFinite() && wv.allFinite(), "attention block: non-finite weights");
}

AttentionCache attention_block_cached(const MatX& tokens, const AttentionBlockParams& p) {
  p.validate();
  require(tokens.cols() == p.model_dim(),
          "attention_block: token width " + std::to_string(tokens.cols()) +
              " != model width " + std::to_string(p.model_dim()));
  const Index n = tokens.rows();
  const Index kh = p.key_dim() / p.heads;
  const Index vh = p.model_dim() / p.heads;
  const double tau = p.scale_denominator(n);

  AttentionCache c;
  c.attended.resize(n, p.model_dim());
  for (int h = 0; h < p.heads; ++h) {
    c.q.push_back(tokens * p.wq.middleCols(h * kh, kh));
    c.k.push_back(tokens * p.wk.middleCols(h * kh, kh));
    c.v.push_back(tokens * p.wv.middleCols(h * vh, vh));
    c.probs.push_back(row_softmax(c.q.back() * c.k.back().transpose() / tau));
    c.attended.middleCols(h * vh, vh) = c.probs.back() * c.v.back();
  }
  c.inner = layer_norm(c.attended, p.ln1);
  c.residual = tokens + c.inner;
  c.out = layer_norm(c.residual, p.ln2);
  return c;
}

MatX attention_block(const MatX& tokens, const AttentionBlockParams& p) {
  return attention_block_cached(tokens, p).out;
}

std::vector<MatX> attention_probabilities(const MatX& tokens, const AttentionBlockParams& p) {
  return attention_block_cached(tokens, p).probs;
}

AttentionBlockGrad attention_block_backward(const MatX& tokens, const AttentionBlockParams& p,
                                            const MatX& grad_out) {
  const AttentionCache c = attention_block_cached(tokens, p);
  require(grad_out.rows() == tokens.rows() && grad_out.cols() == tokens.cols(),
          "attention_block_backward: grad_out shape mismatch");
  const Index kh = p.key_dim() / p.heads;
  const Index vh = p.model_dim() / p.heads;
  const double tau = p.scale_denominator(tokens.rows());

  AttentionBlockGrad g;
  g.ln2 = layer_norm_backward(c.residual, p.ln2, grad_out);
  g.tokens = g.ln2.x;
  g.ln1 = layer_norm_backward(c.attended, p.ln1, g.ln2.x);
  const MatX& d_att = g.ln1.x;

  g.wq = MatX::Zero(p.wq.rows(), p.wq.cols());
  g.wk = MatX::Zero(p.wk.rows(), p.wk.cols());
  g.wv = MatX::Zero(p.wv.rows(), p.wv.cols());
  for (int h = 0; h < p.heads; ++h) {
    const MatX& prob = c.probs[h];
    const MatX d_out_h = d_att.middleCols(h * vh, vh);
    const MatX d_prob = d_out_h * c.v[h].transpose();
    const MatX d_v = prob.transpose() * d_out_h;
    const VecX row_dot = (d_prob.array() * prob.array()).rowwise().sum();
    const MatX d_score = (prob.array() * (d_prob.colwise() - row_dot).array()).matrix() / tau;
    const MatX d_q = d_score * c.k[h];
    const MatX d_k = d_score.transpose() * c.q[h];

    g.wq.middleCols(h * kh, kh) = tokens.transpose() * d_q;
    g.wk.middleCols(h * kh, kh) = tokens.transpose() * d_k;
    g.wv.middleCols(h * vh, vh) = tokens.transpose() * d_v;
    g.tokens += d_q * p.wq.middleCols(h * kh, kh).transpose() +
                d_k * p.wk.middleCols(h * kh, kh).transpose() +
                d_v * p.wv.middleCols(h * vh, vh).transpose();
  }
  return g;
}

MatX Linear::apply(const MatX& x) const {
  require(x.cols() == weight.rows(), "linear: input width mismatch");
  MatX y = x * weight;
  y.rowwise() += bias.transpose();
  return y;
}

VecX Linear::apply(const VecX& x) const {
  require(x.size() == weight.rows(), "linear: input width mismatch");
  return weight.transpose() * x + bias;
}

MatX body_aware_encode(const MatX& tokens, const std::array<AttentionBlockParams, 2>& layers) {
  return attention_block(attention_block(tokens, layers[0]), layers[1]);
}

Regression regress(const MatX& encoded, const RegressorHead& head) {
  require(encoded.rows() == kNumJoints, "regress: expected 24 tokens");
  const MatX x = attention_block(encoded, head.block);

  Regression out;
  out.rot6d = head.rotation.apply(x);
  require(out.rot6d.cols() == 6, "regress: rotation head must output 6 values");
  out.pose = PoseShape::zero();
  for (int j = 0; j < kNumJoints; ++j) {
    const Eigen::Matrix<double, 6, 1> six = out.rot6d.row(j).transpose();
    out.pose.theta.row(j) = axis_angle_from_matrix(rotation_from_6d(six)).transpose();
  }

  const MatX depth = head.depth.apply(x);
  require(depth.cols() == 3, "regress: depth head must output 3 values");
  out.rd.rd = depth;

  const VecX pooled = x.colwise().mean().transpose();
  out.pose.beta = head.shape.apply(pooled);
  require(out.pose.beta.size() == kNumBetas, "regress: shape head must output 10 values");
  const VecX cam = head.camera.apply(pooled);
  require(cam.size() == 3, "regress: camera head must output 3 values");
  out.camera.s = std::exp(cam[0]);
  out.camera.t = cam.tail<2>();
  out.camera.R = Mat3::Identity();
  return out;
}

AttentionBlockParams init_block(Index dim, Index key_dim, int heads, ScaleMode scale,
                                std::uint64_t seed) {
  Rng rng(seed);
  AttentionBlockParams p;
  p.wq = random_matrix(rng, dim, key_dim);
  p.wk = random_matrix(rng, dim, key_dim);
  p.wv = random_matrix(rng, dim, dim);
  p.ln1 = LayerNormParams::identity(dim);
  p.ln2 = LayerNormParams::identity(dim);
  p.heads = heads;
  p.scale = scale;
  p.validate();
  return p;
}

BodyAwareModel init_model(const ModelConfig& config, std::uint64_t seed) {
  require(config.token_dim >= 1 && config.hidden >= 1, "init_model: dimensions must be positive");
  Rng rng(seed);
  BodyAwareModel m;
  m.config = config;
  m.embed = random_linear(rng, config.token_dim, config.hidden);
  for (auto& layer : m.encoder) {
    layer = init_block(config.hidden, config.key_dim, config.heads, config.scale, rng.next());
  }
  m.head.block = init_block(config.hidden, config.key_dim, config.heads, config.scale, rng.next());
  m.head.rotation = random_linear(rng, config.hidden, 6);
  m.head.depth = random_linear(rng, config.hidden, 3);
  m.head.shape = random_linear(rng, config.hidden, kNumBetas);
  m.head.camera = random_linear(rng, config.hidden, 3);
  return m;
}

Regression run_model(const BodyAwareModel& model, const TokenSet& tokens) {
  require(tokens.tokens.rows() == kNumJoints, "run_model: expected 24 tokens");
  const MatX embedded = model.embed.apply(tokens.tokens);
  return regress(body_aware_encode(embedded, model.encoder), model.head);
}

}  // namespace partreg
