#pragma once

#include <vector>

#include "partreg/attention.hpp"
#include "partreg/body_model.hpp"
#include "partreg/camera.hpp"
#include "partreg/losses.hpp"
#include "partreg/ref_planes.hpp"

namespace partreg {

/// Labels 0 = background, p + 1 = part p.
using SegmentationMap = LabelMap;

/// Pixels (row-major, H×W) whose centres (x + 0.5, y + 0.5) fall inside the
/// screen-space triangle. Edges follow the top-left rule: a point exactly on
/// an edge is covered only if that edge is a left edge or a horizontal top
/// edge (y grows downward).
std::vector<bool> triangle_coverage(const Vec2& a, const Vec2& b, const Vec2& c, int height,
                                    int width);

/// Z-buffered part segmentation of the posed mesh. Each triangle carries the
/// majority part of its vertices (ties to the lowest part index); at equal
/// depth the earlier triangle keeps the pixel.
SegmentationMap rasterize_parts(const PosedBody& body, const MatX3i& faces,
                                const PartAssignment& assignment,
                                const WeakPerspectiveCamera& cam, int height, int width);

/// 1 where any part is visible.
SegmentationMap body_mask(const SegmentationMap& seg);

/// H×W×25 indicator volume, channel 0 = background.
FeatureMap seg_to_onehot(const SegmentationMap& seg, int num_classes = kNumSegClasses);

/// Per-pixel argmax over channels (ties to the lower channel).
SegmentationMap onehot_to_seg(const FeatureMap& onehot);

}  // namespace partreg
