#include "partreg/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace partreg {

namespace {

// Twice the signed area of (a, b, p); positive when p is left of a->b in a
// y-up sense.
double edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// With interior on the positive side of edge(a, b, .), the outward normal is
// (b.y - a.y, a.x - b.x).
bool owns_boundary(const Vec2& a, const Vec2& b) {
  const double nx = b.y() - a.y();
  const double ny = a.x() - b.x();
  return nx < 0.0 || (nx == 0.0 && ny < 0.0);
}

struct Setup {
  std::array<Vec2, 3> v;
  std::array<bool, 3> owns;
  double area = 0.0;
  int y0 = 0, y1 = -1, x0 = 0, x1 = -1;
};

// Returns false for degenerate or fully clipped triangles.
bool setup_triangle(Vec2 a, Vec2 b, Vec2 c, int height, int width, Setup& s) {
  double area = edge(a, b, c);
  if (!(std::abs(area) > 0.0) || !std::isfinite(area)) return false;
  if (area < 0.0) {
    std::swap(b, c);
    area = -area;
  }
  s.v = {a, b, c};
  s.area = area;
  for (int i = 0; i < 3; ++i) s.owns[i] = owns_boundary(s.v[i], s.v[(i + 1) % 3]);
  const double min_x = std::min({a.x(), b.x(), c.x()});
  const double max_x = std::max({a.x(), b.x(), c.x()});
  const double min_y = std::min({a.y(), b.y(), c.y()});
  const double max_y = std::max({a.y(), b.y(), c.y()});
  const auto clamp_index = [](double v, int hi) {
    return static_cast<int>(std::clamp(v, -1.0, static_cast<double>(hi)));
  };
  s.x0 = std::max(0, clamp_index(std::floor(min_x - 0.5), width));
  s.x1 = std::min(width - 1, clamp_index(std::ceil(max_x - 0.5), width));
  s.y0 = std::max(0, clamp_index(std::floor(min_y - 0.5), height));
  s.y1 = std::min(height - 1, clamp_index(std::ceil(max_y - 0.5), height));
  return s.x0 <= s.x1 && s.y0 <= s.y1;
}

// Barycentric weights (unnormalized) if the pixel centre is covered.
bool covers(const Setup& s, const Vec2& p, std::array<double, 3>& bary) {
  for (int i = 0; i < 3; ++i) {
    const double e = edge(s.v[i], s.v[(i + 1) % 3], p);
    if (e < 0.0 || (e == 0.0 && !s.owns[i])) return false;
    bary[(i + 2) % 3] = e;  // weight of the vertex opposite edge i
  }
  return true;
}

}  // namespace

std::vector<bool> triangle_coverage(const Vec2& a, const Vec2& b, const Vec2& c, int height,
                                    int width) {
  require(height >= 1 && width >= 1, "triangle_coverage: image size must be positive");
  std::vector<bool> mask(static_cast<std::size_t>(height) * width, false);
  Setup s;
  if (!setup_triangle(a, b, c, height, width, s)) return mask;
  std::array<double, 3> bary{};
  for (int y = s.y0; y <= s.y1; ++y) {
    for (int x = s.x0; x <= s.x1; ++x) {
      if (covers(s, Vec2(x + 0.5, y + 0.5), bary)) mask[static_cast<std::size_t>(y) * width + x] = true;
    }
  }
  return mask;
}

SegmentationMap rasterize_parts(const PosedBody& body, const MatX3i& faces,
                                const PartAssignment& assignment,
                                const WeakPerspectiveCamera& cam, int height, int width) {
  require(height >= 1 && width >= 1, "rasterize_parts: image size must be positive");
  assignment.validate(body.vertices.rows());
  const MatX2 screen = project(cam, body.vertices);
  const MatX3 camera_frame = to_camera_frame(cam, body.vertices);

  SegmentationMap seg{height, width, std::vector<int>(static_cast<std::size_t>(height) * width, 0)};
  std::vector<double> depth(seg.labels.size(), std::numeric_limits<double>::infinity());

  for (Index f = 0; f < faces.rows(); ++f) {
    const std::array<int, 3> idx = {faces(f, 0), faces(f, 1), faces(f, 2)};
    for (int i : idx) require(i >= 0 && i < body.vertices.rows(), "rasterize_parts: bad face index");

    // Majority part; with three distinct parts the lowest wins.
    std::array<int, 3> parts = {assignment.part_of_vertex[idx[0]], assignment.part_of_vertex[idx[1]],
                                assignment.part_of_vertex[idx[2]]};
    int label = std::min({parts[0], parts[1], parts[2]});
    if (parts[0] == parts[1] || parts[0] == parts[2]) label = parts[0];
    else if (parts[1] == parts[2]) label = parts[1];

    // Setup may swap b and c; keep depths attached to their vertices.
    Vec2 a = screen.row(idx[0]).transpose();
    Vec2 b = screen.row(idx[1]).transpose();
    Vec2 c = screen.row(idx[2]).transpose();
    std::array<double, 3> z = {camera_frame(idx[0], 2), camera_frame(idx[1], 2),
                               camera_frame(idx[2], 2)};
    if (edge(a, b, c) < 0.0) {
      std::swap(b, c);
      std::swap(z[1], z[2]);
    }
    Setup s;
    if (!setup_triangle(a, b, c, height, width, s)) continue;

    std::array<double, 3> bary{};
    for (int y = s.y0; y <= s.y1; ++y) {
      for (int x = s.x0; x <= s.x1; ++x) {
        if (!covers(s, Vec2(x + 0.5, y + 0.5), bary)) continue;
        const double d = (bary[0] * z[0] + bary[1] * z[1] + bary[2] * z[2]) / s.area;
        const std::size_t k = static_cast<std::size_t>(y) * width + x;
        if (d < depth[k]) {
          depth[k] = d;
          seg.labels[k] = label + 1;
        }
      }
    }
  }
  return seg;
}

SegmentationMap body_mask(const SegmentationMap& seg) {
  SegmentationMap out = seg;
  for (int& l : out.labels) l = l > 0 ? 1 : 0;
  return out;
}

FeatureMap seg_to_onehot(const SegmentationMap& seg, int num_classes) {
  FeatureMap out(seg.height, seg.width, num_classes);
  for (int h = 0; h < seg.height; ++h) {
    for (int w = 0; w < seg.width; ++w) {
      const int l = seg.at(h, w);
      require(l >= 0 && l < num_classes, "seg_to_onehot: label out of range");
      out.at(h, w, l) = 1.0;
    }
  }
  return out;
}

SegmentationMap onehot_to_seg(const FeatureMap& onehot) {
  SegmentationMap seg{onehot.height, onehot.width,
                      std::vector<int>(static_cast<std::size_t>(onehot.pixels()), 0)};
  for (int h = 0; h < onehot.height; ++h) {
    for (int w = 0; w < onehot.width; ++w) {
      int best = 0;
      for (int c = 1; c < onehot.channels; ++c) {
        if (onehot.at(h, w, c) > onehot.at(h, w, best)) best = c;
      }
      seg.labels[static_cast<std::size_t>(h) * onehot.width + w] = best;
    }
  }
  return seg;
}

}  // namespace partreg
