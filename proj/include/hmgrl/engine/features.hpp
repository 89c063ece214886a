#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hmgrl/tensor.hpp"

namespace hmgrl::engine {

/// Feature rows with one category label each, for external visualisation.
///
/// Layout (little-endian): "HMGF" | version u32 | rows u32 | cols u32 |
/// rows labels u32 | rows*cols f32.
struct FeatureDump {
  Tensor features;
  std::vector<std::uint32_t> labels;

  friend bool operator==(const FeatureDump&, const FeatureDump&) = default;
};

inline constexpr std::string_view kFeatureMagic = "HMGF";
inline constexpr std::uint32_t kFeatureVersion = 1;

std::string encode_features(const FeatureDump& dump);
FeatureDump decode_features(std::string_view bytes);
void write_features(const FeatureDump& dump, const std::filesystem::path& path);
FeatureDump read_features(const std::filesystem::path& path);

}  // namespace hmgrl::engine
