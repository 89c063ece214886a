#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmgrl/tensor.hpp"

namespace hmgrl {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor gradient;
};

/// Ordered, name-unique collection of trainable tensors. Iteration order is
/// insertion order, which fixes the layout of gradient vectors and files.
class ModelParams {
 public:
  Parameter& add(std::string name, Tensor value);

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_gradients();

  friend bool operator==(const ModelParams& a, const ModelParams& b);

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-parameter gradients aligned with ModelParams order.
using Gradients = std::vector<Tensor>;

}  // namespace hmgrl
