#pragma once

#include <functional>

#include "hmgrl/autodiff.hpp"
#include "hmgrl/params.hpp"

namespace hmgrl {

/// Builds a scalar loss on a graph bound to the parameter set. Must be
/// deterministic for finite differences: draw any noise from an RNG created
/// inside the function.
using LossFn = std::function<Var(Graph&)>;

struct Evaluation {
  double loss = 0.0;
  Gradients gradients;
};

/// Reverse-mode loss and gradients; also stores them in each Parameter.
Evaluation evaluate_with_gradients(const LossFn& loss_fn, ModelParams& params);

/// Forward pass only.
double evaluate_loss(const LossFn& loss_fn, const ModelParams& params);

/// Central differences (f(x+h) - f(x-h)) / 2h per coordinate.
Gradients finite_difference_gradient(const LossFn& loss_fn, ModelParams& params, double h);

/// |a - b| / max(|a|, |b|, 1e-8), maximised over all coordinates.
double max_relative_error(const Gradients& a, const Gradients& b);

}  // namespace hmgrl
