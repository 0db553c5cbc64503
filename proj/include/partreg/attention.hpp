#pragma once

#include <vector>

#include "partreg/common.hpp"

namespace partreg {

/// Dense H×W×C volume, row-major (h, w, c).
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c, double fill = 0.0);

  double& at(int h, int w, int c) { return data[index(h, w, c)]; }
  double at(int h, int w, int c) const { return data[index(h, w, c)]; }
  std::size_t index(int h, int w, int c) const {
    return (static_cast<std::size_t>(h) * width + w) * channels + c;
  }
  int pixels() const { return height * width; }

  /// (H·W)×C view of the data.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  as_matrix() const {
    return {data.data(), pixels(), channels};
  }

  /// Throws InvalidArgument on bad dimensions or non-finite entries.
  void validate() const;
};

/// Attention logits with one channel per pooled output row.
using AttentionMap = FeatureMap;

enum class AttentionNorm {
  kSpatialSoftmax,  // per-channel softmax over all H·W pixels
  kSigmoidMean,     // sigmoid gate, averaged over H·W (not convex)
};

/// Per-channel spatial weights, (H·W)×K.
MatX attention_weights(const AttentionMap& att, AttentionNorm norm = AttentionNorm::kSpatialSoftmax);

/// Row k = Σ_{h,w} weight_k[h,w] · feat[h,w,:]. Returns K×C.
MatX aggregate(const AttentionMap& att, const FeatureMap& feat,
               AttentionNorm norm = AttentionNorm::kSpatialSoftmax);

struct AggregateGrad {
  FeatureMap logits;
  FeatureMap features;
};

/// Vector-Jacobian product of aggregate() (spatial softmax) for upstream grad_out (K×C).
AggregateGrad aggregate_backward(const AttentionMap& att, const FeatureMap& feat,
                                 const MatX& grad_out);

/// Channel-wise concatenation of two maps with equal spatial size.
FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b);

/// Body-reference feature: aggregate of concat(f2d, f3d) under a 1-channel mask.
VecX body_reference_feature(const AttentionMap& att_body, const FeatureMap& f2d,
                            const FeatureMap& f3d,
                            AttentionNorm norm = AttentionNorm::kSpatialSoftmax);

/// Part-query features, 24×C''.
MatX part_query_features(const AttentionMap& att_part, const FeatureMap& f_part,
                         AttentionNorm norm = AttentionNorm::kSpatialSoftmax);

}  // namespace partreg
