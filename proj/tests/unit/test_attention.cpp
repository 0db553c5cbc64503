#include <doctest.h>

#include <cmath>

#include "partreg/attention.hpp"
#include "support.hpp"

using namespace partreg;

namespace {

FeatureMap random_map(Rng& rng, int h, int w, int c, double scale = 1.0) {
  FeatureMap m(h, w, c);
  for (double& x : m.data) x = scale * rng.normal();
  return m;
}

// Direct triple loop over pixels, independent of the matrix formulation.
MatX brute_force_aggregate(const FeatureMap& att, const FeatureMap& feat) {
  MatX out = MatX::Zero(att.channels, feat.channels);
  for (int k = 0; k < att.channels; ++k) {
    double z = 0.0;
    for (int h = 0; h < att.height; ++h)
      for (int w = 0; w < att.width; ++w) z += std::exp(att.at(h, w, k));
    for (int h = 0; h < att.height; ++h)
      for (int w = 0; w < att.width; ++w)
        for (int c = 0; c < feat.channels; ++c)
          out(k, c) += std::exp(att.at(h, w, k)) / z * feat.at(h, w, c);
  }
  return out;
}

}  // namespace

TEST_CASE("aggregate matches a brute-force softmax pool") {
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    const FeatureMap att = random_map(rng, 4, 5, 3);
    const FeatureMap feat = random_map(rng, 4, 5, 6);
    CHECK((aggregate(att, feat) - brute_force_aggregate(att, feat)).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("uniform logits give the spatial mean") {
  Rng rng(10);
  const FeatureMap att(3, 3, 1, 0.7);
  const FeatureMap feat = random_map(rng, 3, 3, 4);
  const VecX mean = feat.as_matrix().colwise().mean().transpose();
  CHECK((aggregate(att, feat).row(0).transpose() - mean).norm() < 1e-15);
}

TEST_CASE("a dominant logit selects its pixel") {
  Rng rng(11);
  FeatureMap att(4, 4, 1, 0.0);
  att.at(2, 1, 0) = 800.0;  // overflows exp without the max shift
  const FeatureMap feat = random_map(rng, 4, 4, 3);
  const MatX out = aggregate(att, feat);
  CHECK(out.allFinite());
  for (int c = 0; c < 3; ++c) CHECK(out(0, c) == doctest::Approx(feat.at(2, 1, c)).epsilon(1e-15));
}

TEST_CASE("softmax weights are a convex combination") {
  Rng rng(12);
  const MatX w = attention_weights(random_map(rng, 5, 5, 24, 3.0));
  CHECK((w.array() >= 0.0).all());
  CHECK((w.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("sigmoid-mean alternative") {
  FeatureMap att(1, 2, 1);
  att.at(0, 0, 0) = 0.0;
  att.at(0, 1, 0) = std::log(3.0);  // sigmoid = 0.75
  FeatureMap feat(1, 2, 1);
  feat.at(0, 0, 0) = 2.0;
  feat.at(0, 1, 0) = 4.0;
  CHECK(aggregate(att, feat, AttentionNorm::kSigmoidMean)(0, 0) == doctest::Approx((0.5 * 2 + 0.75 * 4) / 2));
}

TEST_CASE("body-reference and part-query features") {
  Rng rng(13);
  const FeatureMap att_body = random_map(rng, 3, 4, 1);
  const FeatureMap f2d = random_map(rng, 3, 4, 2);
  const FeatureMap f3d = random_map(rng, 3, 4, 3);
  const VecX brf = body_reference_feature(att_body, f2d, f3d);
  REQUIRE(brf.size() == 5);
  CHECK((brf.head(2) - aggregate(att_body, f2d).row(0).transpose()).norm() < 1e-15);
  CHECK((brf.tail(3) - aggregate(att_body, f3d).row(0).transpose()).norm() < 1e-15);

  const MatX pqf = part_query_features(random_map(rng, 3, 4, 24), f2d);
  CHECK(pqf.rows() == 24);
  CHECK(pqf.cols() == 2);
  CHECK_THROWS_AS(part_query_features(random_map(rng, 3, 4, 23), f2d), InvalidArgument);
  CHECK_THROWS_AS(body_reference_feature(random_map(rng, 3, 4, 2), f2d, f3d), InvalidArgument);
}

TEST_CASE("aggregate rejects mismatched or non-finite inputs") {
  Rng rng(14);
  CHECK_THROWS_AS(aggregate(random_map(rng, 3, 4, 1), random_map(rng, 4, 3, 1)), InvalidArgument);
  FeatureMap bad = random_map(rng, 2, 2, 1);
  bad.data[1] = NAN;
  CHECK_THROWS_AS(aggregate(bad, random_map(rng, 2, 2, 1)), InvalidArgument);
  CHECK_THROWS_AS(FeatureMap(0, 2, 1), InvalidArgument);
}
