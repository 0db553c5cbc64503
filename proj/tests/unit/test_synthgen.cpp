#include <doctest.h>

#include <map>

#include "partreg/rotation.hpp"
#include "partreg/synthgen.hpp"
#include "support.hpp"

using namespace partreg;

namespace {

// Index of the vertex at the x-mirror of vertex i, by exhaustive search.
std::vector<Index> mirror_map(const MatX3& v) {
  std::vector<Index> out(v.rows(), -1);
  for (Index i = 0; i < v.rows(); ++i) {
    const Vec3 target(-v(i, 0), v(i, 1), v(i, 2));
    for (Index k = 0; k < v.rows(); ++k) {
      if ((v.row(k).transpose() - target).norm() == 0.0) {
        out[i] = k;
        break;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("default template structure") {
  const auto& m = test::default_model();
  const BodyTemplate& t = m.tmpl;
  CHECK(t.num_vertices() == 690);
  CHECK(t.num_joints() == 24);
  CHECK(t.num_betas() == 10);
  CHECK(t.num_faces() > 0);
  CHECK(t.parent == std::vector<int>(kSmplParents.begin(), kSmplParents.end()));
  std::map<int, int> owned;
  for (int p : m.assignment.part_of_vertex) ++owned[p];
  CHECK(owned.size() == 24);
  // Each vertex depends on at most two bones.
  for (Index i = 0; i < t.num_vertices(); ++i) CHECK((t.blend_weights.row(i).array() > 0).count() <= 2);
}

TEST_CASE("the regressor reproduces the rest joints") {
  const auto& t = test::default_model().tmpl;
  CHECK((regress_joints(t.joint_regressor, t.vertices_rest) - t.joints_rest).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("noise-free template is mirror symmetric") {
  const auto& m = test::default_model();
  const BodyTemplate& t = m.tmpl;
  const auto mirror = mirror_map(t.vertices_rest);
  for (Index i = 0; i < t.num_vertices(); ++i) {
    REQUIRE(mirror[i] >= 0);
    const Index k = mirror[i];
    CHECK(m.assignment.part_of_vertex[k] == kMirrorJoint[m.assignment.part_of_vertex[i]]);
    for (int j = 0; j < kNumJoints; ++j) CHECK(t.blend_weights(k, kMirrorJoint[j]) == t.blend_weights(i, j));
    for (int b = 0; b < kNumBetas; ++b) {
      CHECK(t.shape_basis[b](k, 0) == -t.shape_basis[b](i, 0));
      CHECK(t.shape_basis[b](k, 1) == t.shape_basis[b](i, 1));
      CHECK(t.shape_basis[b](k, 2) == t.shape_basis[b](i, 2));
    }
  }
  for (int j = 0; j < kNumJoints; ++j) {
    const int k = kMirrorJoint[j];
    CHECK(t.joints_rest(k, 0) == -t.joints_rest(j, 0));
    CHECK(t.joints_rest(k, 1) == t.joints_rest(j, 1));
  }
}

TEST_CASE("generation is seeded and deterministic") {
  GenSpec a;
  a.seed = 5;
  const auto m1 = gen_template(a), m2 = gen_template(a);
  CHECK(m1.tmpl.vertices_rest == m2.tmpl.vertices_rest);
  CHECK(m1.tmpl.shape_basis[3] == m2.tmpl.shape_basis[3]);
  GenSpec b = a;
  b.seed = 6;
  CHECK(gen_template(b).tmpl.shape_basis[3] != m1.tmpl.shape_basis[3]);
  b = a;
  b.noise_scale = 1e-3;
  const auto noisy = gen_template(b);
  CHECK(noisy.tmpl.vertices_rest != m1.tmpl.vertices_rest);
  CHECK((noisy.tmpl.vertices_rest - m1.tmpl.vertices_rest).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("vertex budget and proportions") {
  GenSpec s;
  s.vertex_count = 24 * kMinVerticesPerPart;
  CHECK(gen_template(s).tmpl.num_vertices() == 408);
  s.vertex_count = 407;
  CHECK_THROWS_AS(gen_template(s), InvalidArgument);
  s.vertex_count = 1000;
  CHECK(gen_template(s).tmpl.num_vertices() == 1000);
  s.limb_proportions.arm = 1.3;
  const auto long_arms = gen_template(s);
  CHECK(long_arms.tmpl.joints_rest(kLeftWrist, 0) > test::default_model().tmpl.joints_rest(kLeftWrist, 0));
  s.limb_proportions.arm = 0.0;
  CHECK_THROWS_AS(gen_template(s), InvalidArgument);
  s = GenSpec{};
  s.noise_scale = -1.0;
  CHECK_THROWS_AS(gen_template(s), InvalidArgument);
}

TEST_CASE("pose presets") {
  for (const char* name : {"rest", "t_pose", "hands_behind_back", "crouch", "random"}) {
    const PosePreset p = parse_pose_preset(name);
    CHECK(to_string(p) == name);
    const PoseShape ps = gen_pose(1, p);
    CHECK(ps.theta.rows() == 24);
    CHECK(ps.beta.size() == 10);
    ps.validate();
  }
  CHECK_THROWS_AS(parse_pose_preset("dab"), InvalidArgument);
  CHECK(gen_pose(3, PosePreset::kRandom).theta == gen_pose(3, PosePreset::kRandom).theta);
  CHECK(gen_pose(3, PosePreset::kRandom).theta != gen_pose(4, PosePreset::kRandom).theta);
  CHECK(gen_pose(3, PosePreset::kRest).theta.norm() == 0.0);

  // The hands-behind-back preset is left/right mirrored.
  const PoseShape hb = gen_pose(0, PosePreset::kHandsBehindBack);
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3 mirrored = mirror_axis_angle(hb.theta.row(j).transpose());
    CHECK((hb.theta.row(kMirrorJoint[j]).transpose() - mirrored).norm() < 1e-15);
  }
}

TEST_CASE("mirror_axis_angle conjugates by the x reflection") {
  Rng rng(70);
  const Mat3 m = Vec3(-1, 1, 1).asDiagonal();
  for (int i = 0; i < 10; ++i) {
    const Vec3 v = test::random_vec3(rng, 0.8);
    CHECK((rodrigues(mirror_axis_angle(v)) - m * rodrigues(v) * m).norm() < 1e-14);
  }
}
