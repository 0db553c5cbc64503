#include "partreg/attention.hpp"

#include <algorithm>
#include <cmath>

namespace partreg {

FeatureMap::FeatureMap(int h, int w, int c, double fill)
    : height(h), width(w), channels(c) {
  require(h >= 1 && w >= 1 && c >= 1, "feature map: dimensions must be positive");
  data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

void FeatureMap::validate() const {
  require(height >= 1 && width >= 1 && channels >= 1, "feature map: dimensions must be positive");
  require(data.size() == static_cast<std::size_t>(height) * width * channels,
          "feature map: data size does not match dimensions");
  for (double x : data) require(std::isfinite(x), "feature map: non-finite entry");
}

MatX attention_weights(const AttentionMap& att, AttentionNorm norm) {
  att.validate();
  const auto logits = att.as_matrix();
  const int n = att.pixels();
  MatX w(n, att.channels);
  for (int k = 0; k < att.channels; ++k) {
    if (norm == AttentionNorm::kSpatialSoftmax) {
      const double m = logits.col(k).maxCoeff();
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        w(i, k) = std::exp(logits(i, k) - m);
        total += w(i, k);
      }
      w.col(k) /= total;
    } else {
      for (int i = 0; i < n; ++i) w(i, k) = 1.0 / (1.0 + std::exp(-logits(i, k))) / n;
    }
  }
  return w;
}

MatX aggregate(const AttentionMap& att, const FeatureMap& feat, AttentionNorm norm) {
  feat.validate();
  require(att.height == feat.height && att.width == feat.width,
          "aggregate: attention and feature spatial sizes differ");
  const MatX w = attention_weights(att, norm);
  return w.transpose() * feat.as_matrix();
}

AggregateGrad aggregate_backward(const AttentionMap& att, const FeatureMap& feat,
                                 const MatX& grad_out) {
  require(att.height == feat.height && att.width == feat.width,
          "aggregate_backward: spatial sizes differ");
  require(grad_out.rows() == att.channels && grad_out.cols() == feat.channels,
          "aggregate_backward: grad_out must be K×C");
  const MatX w = attention_weights(att);
  const auto f = feat.as_matrix();
  const MatX out = w.transpose() * f;

  AggregateGrad g{FeatureMap(att.height, att.width, att.channels),
                  FeatureMap(feat.height, feat.width, feat.channels)};
  const MatX df = w * grad_out;                      // (HW)×C
  const MatX gf = f * grad_out.transpose();          // (HW)×K : G_k · f_i
  const VecX go = (grad_out.array() * out.array()).rowwise().sum();  // G_k · out_k
  for (int i = 0; i < att.pixels(); ++i) {
    for (int k = 0; k < att.channels; ++k) {
      g.logits.data[static_cast<std::size_t>(i) * att.channels + k] = w(i, k) * (gf(i, k) - go[k]);
    }
    for (int c = 0; c < feat.channels; ++c) {
      g.features.data[static_cast<std::size_t>(i) * feat.channels + c] = df(i, c);
    }
  }
  return g;
}

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
  require(a.height == b.height && a.width == b.width, "concat_channels: spatial sizes differ");
  FeatureMap out(a.height, a.width, a.channels + b.channels);
  for (int h = 0; h < a.height; ++h) {
    for (int w = 0; w < a.width; ++w) {
      for (int c = 0; c < a.channels; ++c) out.at(h, w, c) = a.at(h, w, c);
      for (int c = 0; c < b.channels; ++c) out.at(h, w, a.channels + c) = b.at(h, w, c);
    }
  }
  return out;
}

VecX body_reference_feature(const AttentionMap& att_body, const FeatureMap& f2d,
                            const FeatureMap& f3d, AttentionNorm norm) {
  require(att_body.channels == 1, "body_reference_feature: body attention must have 1 channel");
  return aggregate(att_body, concat_channels(f2d, f3d), norm).row(0).transpose();
}

MatX part_query_features(const AttentionMap& att_part, const FeatureMap& f_part,
                         AttentionNorm norm) {
  require(att_part.channels == kNumJoints, "part_query_features: part attention must have 24 channels");
  return aggregate(att_part, f_part, norm);
}

}  // namespace partreg
