#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "partreg/body_model.hpp"
#include "partreg/camera.hpp"
#include "partreg/common.hpp"
#include "partreg/ref_planes.hpp"

namespace partreg {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr int kHiddenWidth = 128;

/// One body-aware token per part: concat(part-query feature, body-reference feature).
struct TokenSet {
  MatX tokens;  // 24×D
};

TokenSet make_tokens(const MatX& part_query, const VecX& body_reference);

struct LayerNormParams {
  VecX gain;
  VecX bias;

  static LayerNormParams identity(Index dim);
};

/// Row-wise y = gain ⊙ (x - mean) / sqrt(var + eps) + bias, population variance.
/// A constant row maps to the bias.
MatX layer_norm(const MatX& x, const LayerNormParams& p);

struct LayerNormGrad {
  MatX x;
  VecX gain;
  VecX bias;
};
LayerNormGrad layer_norm_backward(const MatX& x, const LayerNormParams& p, const MatX& grad_out);

/// Denominator convention inside softmax(QK^T / sqrt(d)).
enum class ScaleMode {
  kKeyDim,          // d = per-head key width
  kSequenceLength,  // d = number of tokens
};

/// Parameters of LN(T + LN(softmax(QK^T/sqrt(d)) V)), Q = T Wq, K = T Wk, V = T Wv.
/// Wq and Wk are D×dk, Wv is D×D so the residual add is well-formed. With
/// `heads` > 1, dk and D are split evenly and per-head outputs concatenated.
struct AttentionBlockParams {
  MatX wq;
  MatX wk;
  MatX wv;
  LayerNormParams ln1;  // applied to the attention output
  LayerNormParams ln2;  // applied after the residual add
  int heads = 1;
  ScaleMode scale = ScaleMode::kKeyDim;

  Index model_dim() const { return wv.rows(); }
  Index key_dim() const { return wq.cols(); }
  /// sqrt(d) for a sequence of `num_tokens`.
  double scale_denominator(Index num_tokens) const;
  void validate() const;
};

struct AttentionCache {
  std::vector<MatX> q, k, v, probs;  // per head
  MatX attended;                     // N×D, heads concatenated
  MatX inner;                        // LN1(attended)
  MatX residual;                     // T + inner
  MatX out;
};

MatX attention_block(const MatX& tokens, const AttentionBlockParams& p);
AttentionCache attention_block_cached(const MatX& tokens, const AttentionBlockParams& p);

/// Per-head row-stochastic attention matrices softmax(QK^T/sqrt(d)).
std::vector<MatX> attention_probabilities(const MatX& tokens, const AttentionBlockParams& p);

struct AttentionBlockGrad {
  MatX tokens;
  MatX wq, wk, wv;
  LayerNormGrad ln1;  // .x unused
  LayerNormGrad ln2;  // .x unused
};
AttentionBlockGrad attention_block_backward(const MatX& tokens, const AttentionBlockParams& p,
                                            const MatX& grad_out);

struct Linear {
  MatX weight;  // in×out
  VecX bias;

  MatX apply(const MatX& x) const;
  VecX apply(const VecX& x) const;
};

/// Two stacked attention blocks.
MatX body_aware_encode(const MatX& tokens, const std::array<AttentionBlockParams, 2>& layers);

struct RegressorHead {
  AttentionBlockParams block;  // the single-layer regression transformer
  Linear rotation;             // hidden -> 6 (per token)
  Linear depth;                // hidden -> 3 (per token)
  Linear shape;                // hidden -> 10 (mean-pooled)
  Linear camera;               // hidden -> 3 (mean-pooled): log s, tx, ty
};

struct Regression {
  PoseShape pose;
  WeakPerspectiveCamera camera;
  RelativeDepth rd;
  MatX rot6d;  // 24×6
};

/// Attention block, then per-token rotation (6D -> matrix -> axis-angle) and
/// relative depth, and mean-pooled shape and camera. Camera scale is exp of the
/// raw output; camera rotation is the identity.
Regression regress(const MatX& encoded, const RegressorHead& head);

struct ModelConfig {
  Index token_dim = 0;
  Index hidden = kHiddenWidth;
  Index key_dim = kHiddenWidth;
  int heads = 1;
  ScaleMode scale = ScaleMode::kKeyDim;
};

struct BodyAwareModel {
  ModelConfig config;
  Linear embed;  // token_dim -> hidden
  std::array<AttentionBlockParams, 2> encoder;
  RegressorHead head;
};

/// Weights uniform in (-0.02, 0.02) from `seed`; biases zero; LayerNorm gains one.
BodyAwareModel init_model(const ModelConfig& config, std::uint64_t seed);

AttentionBlockParams init_block(Index dim, Index key_dim, int heads, ScaleMode scale,
                                std::uint64_t seed);

/// embed -> two encoder blocks -> regress.
Regression run_model(const BodyAwareModel& model, const TokenSet& tokens);

}  // namespace partreg
