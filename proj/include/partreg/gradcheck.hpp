#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "partreg/common.hpp"
#include "partreg/transformer.hpp"

namespace partreg {

using ScalarFn = std::function<double(const VecX&)>;

struct GradCheckOptions {
  double step = 1e-5;
  int directions = 0;  // 0 = every coordinate, otherwise random unit directions
  std::uint64_t seed = 0;
};

/// Central differences against the analytic gradient `grad` of f at x:
/// ||a - n|| / max(||a||, ||n||) over the probed directions, where a holds
/// the analytic directional derivatives and n the numeric ones. Returns 0
/// when both vanish.
double grad_check(const ScalarFn& f, const VecX& x, const VecX& grad,
                  const GradCheckOptions& opt = {});

struct OpCheck {
  std::string op;
  double max_rel_error = 0.0;
  int instances = 0;
};

/// Every differentiable op (aggregation, attention block in both scale modes
/// and with two heads, LayerNorm, projection, each loss term) on `instances`
/// random small problems drawn from `seed`.
std::vector<OpCheck> run_gradient_suite(std::uint64_t seed, int instances = 20);

/// Attention blocks of a model checked along random directions with random
/// input tokens.
std::vector<OpCheck> check_model_blocks(const BodyAwareModel& model, std::uint64_t seed,
                                        int directions = 6);

}  // namespace partreg
