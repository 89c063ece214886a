#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hmgrl/data/bundle.hpp"

namespace hmgrl::data {

/// Parameters of the synthetic corpus. Each category gets a prototype
/// p ~ scale * N(0, I); each sample a base b ~ N(p, spread^2 I). Token rows
/// scatter around b, patch rows mix b with independent noise by `coupling`.
struct GeneratorSpec {
  TaskKind task = TaskKind::kMet;
  std::size_t categories = 2;
  std::vector<std::string> names;  // empty: "category-<i>"
  std::size_t d = 8;
  std::size_t samples_per_category = 10;
  std::size_t min_tokens = 4;
  std::size_t max_tokens = 8;
  std::size_t min_patches = 2;
  std::size_t max_patches = 4;
  double prototype_scale = 1.0;
  double spread = 0.1;
  double coupling = 0.8;
  std::uint64_t seed = 0;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

/// Throws FormatError(kValidation) naming the offending field.
void validate_generator_spec(const GeneratorSpec& spec);

GeneratorSpec generator_spec_from_json(std::string_view text);
std::string generator_spec_to_json(const GeneratorSpec& spec);
GeneratorSpec read_generator_spec(const std::filesystem::path& path);

/// Deterministic in `spec`. Samples are ordered category-major with ids
/// "<category name>-<index>"; each sample draws from its own derived stream.
Bundle generate_synthetic_corpus(const GeneratorSpec& spec);

}  // namespace hmgrl::data
