#include "hmgrl/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hmgrl {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw std::invalid_argument("optimizer: unknown kind '" + std::string(name) + "'");
}

OptimizerState OptimizerState::for_params(const ModelParams& params, OptimizerKind kind, double lr) {
  OptimizerState state;
  state.kind = kind;
  state.learning_rate = lr;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.value.shape());
    state.second_moment.emplace_back(p.value.shape());
  }
  return state;
}

void optimizer_step(OptimizerState& state, ModelParams& params, const Gradients& gradients) {
  if (gradients.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("optimizer_step: expected " + std::to_string(params.size()) +
                                " gradient tensors, got " + std::to_string(gradients.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (gradients[i].size() != params[i].value.size() ||
        state.first_moment[i].size() != params[i].value.size()) {
      throw std::invalid_argument("optimizer_step: shape mismatch for '" + params[i].name + "'");
    }
    if (!gradients[i].all_finite()) {
      throw std::invalid_argument("optimizer_step: non-finite gradient for '" + params[i].name + "'");
    }
  }

  ++state.step;
  const double lr = state.learning_rate;
  if (state.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto value = params[i].value.data();
      const auto grad = gradients[i].data();
      for (std::size_t j = 0; j < value.size(); ++j) value[j] -= lr * grad[j];
    }
    return;
  }

  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value.data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    const auto grad = gradients[i].data();
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * grad[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace hmgrl
