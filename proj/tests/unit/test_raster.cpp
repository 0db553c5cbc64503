#include <doctest.h>

#include "partreg/pipeline.hpp"
#include "partreg/raster.hpp"
#include "support.hpp"

using namespace partreg;

namespace {

double orient(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 u = a - p, v = b - p;
  return u.x() * v.y() - u.y() * v.x();
}

// Point-in-triangle with the top-left rule stated geometrically: a boundary
// point counts when every edge it lies on is a left edge (interior toward +x)
// or a top edge (horizontal, interior toward +y in image coordinates).
bool oracle_covers(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
  const std::array<Vec2, 3> v = {a, b, c};
  const double area = orient(a, b, c);
  if (area == 0.0) return false;
  for (int i = 0; i < 3; ++i) {
    const Vec2& e0 = v[i];
    const Vec2& e1 = v[(i + 1) % 3];
    const Vec2& opposite = v[(i + 2) % 3];
    const double s = orient(e0, e1, p) * (area > 0 ? 1.0 : -1.0);
    if (s < 0.0) return false;
    if (s == 0.0) {
      const Vec2 dir = e1 - e0;
      Vec2 inward(-dir.y(), dir.x());
      if (inward.dot(opposite - e0) < 0.0) inward = -inward;
      const bool left = inward.x() > 0.0;
      const bool top = inward.x() == 0.0 && inward.y() > 0.0;
      if (!left && !top) return false;
    }
  }
  return true;
}

Vec2 random_point(Rng& rng, double lo, double hi, bool snap) {
  Vec2 p(rng.uniform(lo, hi), rng.uniform(lo, hi));
  if (snap) p = (2.0 * p).array().round().matrix() / 2.0;
  return p;
}

PosedBody flat_body(const MatX3& v) { return {v, MatX3::Zero(kNumJoints, 3), {}}; }

}  // namespace

TEST_CASE("triangle coverage equals the point-in-triangle oracle") {
  Rng rng(50);
  for (int i = 0; i < 200; ++i) {
    const bool snap = i % 2 == 0;  // half-integer vertices put pixel centres on edges
    const Vec2 a = random_point(rng, -8, 72, snap), b = random_point(rng, -8, 72, snap),
               c = random_point(rng, -8, 72, snap);
    const auto mask = triangle_coverage(a, b, c, 64, 64);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        const bool expected = oracle_covers(a, b, c, Vec2(x + 0.5, y + 0.5));
        if (mask[y * 64 + x] != expected) FAIL_CHECK("pixel " << x << "," << y << " triangle " << i);
      }
    }
  }
}

TEST_CASE("a triangulated grid covers every pixel exactly once") {
  Rng rng(51);
  const int n = 8, size = 64;
  // Grid vertices with snapped, jittered interior points; the border stays on the canvas edge.
  std::vector<Vec2> g((n + 1) * (n + 1));
  for (int r = 0; r <= n; ++r) {
    for (int c = 0; c <= n; ++c) {
      Vec2 p(c * 8.0, r * 8.0);
      if (r > 0 && r < n && c > 0 && c < n) p += Vec2(std::round(rng.uniform(-6, 6)) / 2, std::round(rng.uniform(-6, 6)) / 2);
      g[r * (n + 1) + c] = p;
    }
  }
  std::vector<int> hits(size * size, 0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Vec2 p00 = g[r * (n + 1) + c], p01 = g[r * (n + 1) + c + 1];
      const Vec2 p10 = g[(r + 1) * (n + 1) + c], p11 = g[(r + 1) * (n + 1) + c + 1];
      for (const auto& tri : {std::array<Vec2, 3>{p00, p01, p11}, std::array<Vec2, 3>{p00, p11, p10}}) {
        const auto m = triangle_coverage(tri[0], tri[1], tri[2], size, size);
        for (int k = 0; k < size * size; ++k) hits[k] += m[k];
      }
    }
  }
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}

TEST_CASE("coverage ignores winding and degenerate triangles") {
  const auto a = triangle_coverage({1, 1}, {30, 2}, {5, 40}, 48, 48);
  const auto b = triangle_coverage({1, 1}, {5, 40}, {30, 2}, 48, 48);
  CHECK(a == b);
  const auto d = triangle_coverage({1, 1}, {10, 10}, {20, 20}, 32, 32);
  CHECK(std::none_of(d.begin(), d.end(), [](bool v) { return v; }));
  const auto off = triangle_coverage({1e300, 1}, {-1e300, 2}, {5, -1e300}, 8, 8);
  CHECK(off.size() == 64);
}

TEST_CASE("z-buffer keeps the nearest triangle") {
  // Two overlapping squares-worth of triangles at z = 0.5 (part 3) and z = 0.1 (part 7).
  MatX3 v(6, 3);
  v << 0, 0, 0.5,   16, 0, 0.5,   0, 16, 0.5,
       0, 0, 0.1,   16, 0, 0.1,   0, 16, 0.1;
  PartAssignment parts{std::vector<int>{3, 3, 3, 7, 7, 7}};
  WeakPerspectiveCamera cam;  // identity: screen = (x, y), depth = z
  for (const auto& order : {std::vector<int>{0, 1}, std::vector<int>{1, 0}}) {
    MatX3i faces(2, 3);
    for (int f = 0; f < 2; ++f) faces.row(f) << 3 * order[f], 3 * order[f] + 1, 3 * order[f] + 2;
    const auto seg = rasterize_parts(flat_body(v), faces, parts, cam, 16, 16);
    CHECK(seg.at(2, 2) == 8);  // part 7 + 1
    CHECK(seg.at(15, 15) == 0);
  }
}

TEST_CASE("equal depth keeps the earlier triangle") {
  MatX3 v(6, 3);
  v << 0, 0, 0.2,   16, 0, 0.2,   0, 16, 0.2,
       0, 0, 0.2,   16, 0, 0.2,   0, 16, 0.2;
  PartAssignment parts{std::vector<int>{1, 1, 1, 2, 2, 2}};
  MatX3i faces(2, 3);
  faces << 3, 4, 5,
           0, 1, 2;
  const auto seg = rasterize_parts(flat_body(v), faces, parts, WeakPerspectiveCamera{}, 16, 16);
  CHECK(seg.at(3, 3) == 3);
}

TEST_CASE("triangle label is the majority part, ties to the lowest") {
  MatX3 v(3, 3);
  v << 0, 0, 0,   16, 0, 0,   0, 16, 0;
  MatX3i faces(1, 3);
  faces << 0, 1, 2;
  const auto seg_of = [&](std::vector<int> p) {
    return rasterize_parts(flat_body(v), faces, PartAssignment{p}, WeakPerspectiveCamera{}, 8, 8).at(1, 1);
  };
  CHECK(seg_of({5, 2, 5}) == 6);
  CHECK(seg_of({9, 4, 6}) == 5);
}

TEST_CASE("rendering the generated body is deterministic and shows every visible part") {
  const auto& m = test::default_model();
  const PosedBody body = forward(m.tmpl, gen_pose(3, PosePreset::kTPose));
  const auto cam = fit_front_camera(body.vertices, 96, 96);
  const auto a = rasterize_parts(body, m.tmpl.faces, m.assignment, cam, 96, 96);
  const auto b = rasterize_parts(body, m.tmpl.faces, m.assignment, cam, 96, 96);
  CHECK(a.labels == b.labels);
  // Head above pelvis above feet in image rows.
  const auto row_of = [&](int label) {
    for (int y = 0; y < 96; ++y)
      for (int x = 0; x < 96; ++x)
        if (a.at(y, x) == label) return y;
    return -1;
  };
  CHECK(row_of(kHead + 1) >= 0);
  CHECK(row_of(kHead + 1) < row_of(kPelvis + 1));
  CHECK(row_of(kPelvis + 1) < row_of(kLeftFoot + 1));
}

TEST_CASE("one-hot round trip and body mask") {
  SegmentationMap s{2, 3, {0, 1, 24, 5, 0, 3}};
  const FeatureMap oh = seg_to_onehot(s);
  CHECK(oh.channels == 25);
  CHECK(onehot_to_seg(oh).labels == s.labels);
  CHECK(body_mask(s).labels == std::vector<int>{0, 1, 1, 1, 0, 1});
  s.labels[0] = 25;
  CHECK_THROWS_AS(seg_to_onehot(s), InvalidArgument);
}
