#pragma once

#include <cstdint>
#include <string_view>

#include "hmgrl/params.hpp"

namespace hmgrl {

enum class OptimizerKind { kAdam, kSgd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

/// Adam moments and hyper-parameters. The plain-SGD mode ignores the moments.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  Gradients first_moment;
  Gradients second_moment;

  static OptimizerState for_params(const ModelParams& params, OptimizerKind kind, double lr);
};

/// One update of `params` from `gradients` (aligned with params order).
void optimizer_step(OptimizerState& state, ModelParams& params, const Gradients& gradients);

}  // namespace hmgrl
