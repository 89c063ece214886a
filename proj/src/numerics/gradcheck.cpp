#include "hmgrl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hmgrl {

Evaluation evaluate_with_gradients(const LossFn& loss_fn, ModelParams& params) {
  Graph graph(&params);
  Var loss = loss_fn(graph);
  graph.backward(loss);
  Evaluation out{loss.item(), graph.parameter_gradients()};
  for (std::size_t i = 0; i < params.size(); ++i) params[i].gradient = out.gradients[i];
  return out;
}

double evaluate_loss(const LossFn& loss_fn, const ModelParams& params) {
  Graph graph(&params, false);
  return loss_fn(graph).item();
}

Gradients finite_difference_gradient(const LossFn& loss_fn, ModelParams& params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be positive");
  Gradients out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor grad(params[i].value.shape());
    auto value = params[i].value.data();
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double original = value[j];
      value[j] = original + h;
      const double up = evaluate_loss(loss_fn, params);
      value[j] = original - h;
      const double down = evaluate_loss(loss_fn, params);
      value[j] = original;
      grad[j] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(grad));
  }
  return out;
}

double max_relative_error(const Gradients& a, const Gradients& b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw std::invalid_argument("max_relative_error: shape mismatch");
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      const double x = a[i][j], y = b[i][j];
      const double denom = std::max({std::abs(x), std::abs(y), 1e-8});
      worst = std::max(worst, std::abs(x - y) / denom);
    }
  }
  return worst;
}

}  // namespace hmgrl
