#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hmgrl/data/binary_io.hpp"
#include "hmgrl/types.hpp"

namespace hmgrl::data {

/// Precomputed encoder outputs for one corpus.
///
/// Binary layout (all integers little-endian u32, floats IEEE-754 f32):
///   "HMGB" | version | header length | header JSON
///   per sample: id (length + bytes) | label | |T| | |V| | cls | e1 | e2
///               (0xFFFFFFFF when absent) | |T|*d floats | |V|*d floats
///   prototype matrix, categories x d floats
/// The JSON header holds task, d, category names and counts.
struct Bundle {
  TaskKind task = TaskKind::kMet;
  std::size_t d = 0;
  std::vector<EmbeddedSample> samples;
  PrototypeSet prototypes;

  std::size_t category_count() const { return prototypes.size(); }

  friend bool operator==(const Bundle&, const Bundle&) = default;
};

inline constexpr std::string_view kBundleMagic = "HMGB";
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::uint32_t kAbsentMarker = 0xFFFFFFFFu;

/// Throws FormatError(kValidation | kInconsistentWidth) on a broken invariant.
void validate_bundle(const Bundle& bundle);

std::string encode_bundle(const Bundle& bundle);
Bundle decode_bundle(std::string_view bytes);

/// JSON manifest with the same logical schema; floats as decimal text.
std::string encode_bundle_json(const Bundle& bundle);
Bundle decode_bundle_json(std::string_view text);

void write_bundle(const Bundle& bundle, const std::filesystem::path& path);
/// Reads either format, detected from the first byte.
Bundle read_bundle(const std::filesystem::path& path);

}  // namespace hmgrl::data
