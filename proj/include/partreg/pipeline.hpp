#pragma once

#include <cstdint>

#include "partreg/attention.hpp"
#include "partreg/body_model.hpp"
#include "partreg/camera.hpp"
#include "partreg/losses.hpp"
#include "partreg/raster.hpp"
#include "partreg/ref_planes.hpp"
#include "partreg/transformer.hpp"

namespace partreg {

inline constexpr int kDefaultLabelSize = 56;

/// Front view that fits the mesh's x/y extent into 90% of an H×W crop.
WeakPerspectiveCamera fit_front_camera(const MatX3& vertices, int height, int width);

/// Supervision for one posed body: projected and 3D joints (confidence 1),
/// the pose itself, relative depth, and rendered body/part labels.
GroundTruth make_ground_truth(const BodyTemplate& tmpl, const PartAssignment& assignment,
                              const PoseShape& pose, const Vec3& trans,
                              const WeakPerspectiveCamera& cam, int height, int width);

/// Stand-in for a backbone: attention logits from a part segmentation plus
/// seeded Gaussian feature maps.
struct BackboneOutput {
  AttentionMap att_body;  // 1 channel
  AttentionMap att_part;  // 24 channels
  FeatureMap f2d;
  FeatureMap f3d;
  FeatureMap f_part;
};

BackboneOutput synthetic_backbone(const SegmentationMap& parts, int channels, std::uint64_t seed,
                                  double logit_scale = 4.0);

TokenSet backbone_tokens(const BackboneOutput& b);

/// Token width produced by backbone_tokens for `channels` feature channels.
inline Index token_dim_for(int channels) { return 3 * static_cast<Index>(channels); }

/// Runs the model and derives loss-ready predictions: joints from forward(),
/// 2D joints through the regressed camera, aux outputs equal to the main ones,
/// and segmentation logits from the attention maps.
Predictions predict(const BodyAwareModel& model, const BodyTemplate& tmpl,
                    const BackboneOutput& backbone, Regression* regression = nullptr);

}  // namespace partreg
