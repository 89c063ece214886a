#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hmgrl/tensor.hpp"

namespace hmgrl {

/// Entity typing (one entity) or relation extraction (an entity pair).
enum class TaskKind { kMet, kMre };

std::string_view to_string(TaskKind task);
TaskKind task_from_string(std::string_view name);

/// One text/image pair as encoder outputs plus entity-marker rows.
struct EmbeddedSample {
  std::string sample_id;
  std::uint32_t label = 0;
  Tensor tokens;   // |T| x d
  Tensor patches;  // |V| x d
  std::uint32_t marker_cls = 0;
  std::uint32_t marker_e1 = 0;
  std::optional<std::uint32_t> marker_e2;

  friend bool operator==(const EmbeddedSample&, const EmbeddedSample&) = default;
};

/// Category names with one pooled prototype embedding per row.
class PrototypeSet {
 public:
  PrototypeSet() = default;
  PrototypeSet(std::vector<std::string> names, Tensor prototypes);

  const std::vector<std::string>& names() const { return names_; }
  const Tensor& matrix() const { return prototypes_; }
  std::size_t size() const { return names_.size(); }
  std::size_t width() const { return prototypes_.cols(); }
  bool empty() const { return names_.empty(); }

  /// Sub-set restricted to the given category rows, in that order.
  PrototypeSet subset(const std::vector<std::size_t>& rows) const;
  /// Rows of `a` followed by rows of `b`.
  static PrototypeSet concat(const PrototypeSet& a, const PrototypeSet& b);

  friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;

 private:
  std::vector<std::string> names_;
  Tensor prototypes_;
};

}  // namespace hmgrl
