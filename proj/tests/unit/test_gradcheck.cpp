#include <doctest.h>

#include <set>

#include "partreg/gradcheck.hpp"
#include "support.hpp"

using namespace partreg;

TEST_CASE("grad_check accepts a correct gradient and flags a wrong one") {
  // f(x) = sum sin(x_i) x_{i+1}
  const ScalarFn f = [](const VecX& x) {
    double s = 0.0;
    for (Index i = 0; i + 1 < x.size(); ++i) s += std::sin(x[i]) * x[i + 1];
    return s;
  };
  Rng rng(90);
  const VecX x = test::random_matrix(rng, 7, 1).col(0);
  VecX g = VecX::Zero(7);
  for (Index i = 0; i + 1 < x.size(); ++i) {
    g[i] += std::cos(x[i]) * x[i + 1];
    g[i + 1] += std::sin(x[i]);
  }
  CHECK(grad_check(f, x, g) < 1e-8);
  GradCheckOptions dirs;
  dirs.directions = 4;
  dirs.seed = 3;
  CHECK(grad_check(f, x, g, dirs) < 1e-8);

  VecX wrong = g;
  wrong[2] *= 1.01;
  CHECK(grad_check(f, x, wrong) > 1e-4);
  CHECK(grad_check([](const VecX&) { return 1.0; }, x, VecX::Zero(7)) == 0.0);
  CHECK_THROWS_AS(grad_check(f, x, VecX::Zero(6)), InvalidArgument);
}

TEST_CASE("gradient suite covers every op and passes") {
  const auto checks = run_gradient_suite(2, 4);
  std::set<std::string> ops;
  for (const auto& c : checks) {
    ops.insert(c.op);
    CHECK(c.instances == 4);
    CHECK_MESSAGE(c.max_rel_error < 1e-6, c.op << ": " << c.max_rel_error);
  }
  for (const char* op : {"aggregate", "attention_block", "attention_block_seqlen", "attention_block_2head",
                         "layer_norm", "project", "loss_2d", "loss_3d", "loss_smpl", "loss_rd", "loss_bseg",
                         "loss_pseg"}) {
    CHECK(ops.count(op) == 1);
  }
}

TEST_CASE("model blocks pass along random directions") {
  ModelConfig cfg{6, 16, 8, 2, ScaleMode::kKeyDim};
  const auto checks = check_model_blocks(init_model(cfg, 4), 4);
  CHECK(checks.size() == 3);
  for (const auto& c : checks) CHECK_MESSAGE(c.max_rel_error < 1e-6, c.op << ": " << c.max_rel_error);
}
