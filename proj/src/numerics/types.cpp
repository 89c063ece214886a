#include "hmgrl/types.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace hmgrl {

std::string_view to_string(TaskKind task) { return task == TaskKind::kMet ? "MET" : "MRE"; }

TaskKind task_from_string(std::string_view name) {
  if (name == "MET" || name == "met") return TaskKind::kMet;
  if (name == "MRE" || name == "mre") return TaskKind::kMre;
  throw std::invalid_argument("task: expected MET or MRE, got '" + std::string(name) + "'");
}

PrototypeSet::PrototypeSet(std::vector<std::string> names, Tensor prototypes)
    : names_(std::move(names)), prototypes_(std::move(prototypes)) {
  if (prototypes_.rank() != 2) prototypes_ = prototypes_.reshaped({prototypes_.rows(), prototypes_.cols()});
  if (prototypes_.rows() != names_.size()) {
    throw std::invalid_argument("prototype set: " + std::to_string(names_.size()) + " names but " +
                                std::to_string(prototypes_.rows()) + " rows");
  }
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw std::invalid_argument("prototype set: duplicate category '" + n + "'");
  }
}

PrototypeSet PrototypeSet::subset(const std::vector<std::size_t>& rows) const {
  std::vector<std::string> names;
  std::vector<double> values;
  for (std::size_t r : rows) {
    if (r >= names_.size()) throw std::out_of_range("prototype set: row out of range");
    names.push_back(names_[r]);
    const auto row = prototypes_.row_span(r);
    values.insert(values.end(), row.begin(), row.end());
  }
  return {std::move(names), Tensor::matrix(rows.size(), width(), std::move(values))};
}

PrototypeSet PrototypeSet::concat(const PrototypeSet& a, const PrototypeSet& b) {
  if (!a.empty() && !b.empty() && a.width() != b.width()) {
    throw std::invalid_argument("prototype set: width mismatch in concat");
  }
  std::vector<std::string> names = a.names_;
  names.insert(names.end(), b.names_.begin(), b.names_.end());
  std::vector<double> values = a.prototypes_.values();
  values.insert(values.end(), b.prototypes_.values().begin(), b.prototypes_.values().end());
  const std::size_t width = a.empty() ? b.width() : a.width();
  const std::size_t rows = names.size();
  return {std::move(names), Tensor::matrix(rows, width, std::move(values))};
}

}  // namespace hmgrl
