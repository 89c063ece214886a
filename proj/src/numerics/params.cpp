#include "hmgrl/params.hpp"

#include <stdexcept>

namespace hmgrl {

Parameter& ModelParams::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  Tensor gradient(value.shape());
  params_.push_back({std::move(name), std::move(value), std::move(gradient)});
  return params_.back();
}

bool ModelParams::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ModelParams::index_of(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

Parameter& ModelParams::at(std::string_view name) { return params_[index_of(name)]; }
const Parameter& ModelParams::at(std::string_view name) const { return params_[index_of(name)]; }

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ModelParams::zero_gradients() {
  for (auto& p : params_) p.gradient.fill(0.0);
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) {
      return false;
    }
  }
  return true;
}

}  // namespace hmgrl
