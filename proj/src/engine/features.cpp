#include "hmgrl/engine/features.hpp"

#include "hmgrl/data/binary_io.hpp"

namespace hmgrl::engine {

using data::FormatError;
using data::FormatErrorCode;

std::string encode_features(const FeatureDump& dump) {
  const std::size_t rows = dump.features.size() == 0 ? 0 : dump.features.rows();
  const std::size_t cols = dump.features.size() == 0 ? 0 : dump.features.cols();
  if (dump.labels.size() != rows) throw FormatError(FormatErrorCode::kValidation, "feature dump needs one label per row");
  data::ByteWriter w;
  w.put_bytes(kFeatureMagic);
  w.put_u32(kFeatureVersion);
  w.put_u32(static_cast<std::uint32_t>(rows));
  w.put_u32(static_cast<std::uint32_t>(cols));
  for (std::uint32_t label : dump.labels) w.put_u32(label);
  for (double v : dump.features.data()) w.put_f32(static_cast<float>(v));
  return w.bytes();
}

FeatureDump decode_features(std::string_view bytes) {
  data::ByteReader r(bytes);
  if (bytes.size() < 4 || r.get_bytes(4) != kFeatureMagic) throw FormatError(FormatErrorCode::kBadMagic, "not an HMGF feature file");
  if (const auto v = r.get_u32(); v != kFeatureVersion) {
    throw FormatError(FormatErrorCode::kVersionMismatch, "feature file version " + std::to_string(v));
  }
  const std::size_t rows = r.get_u32();
  const std::size_t cols = r.get_u32();
  if (rows * (4 + cols * 4) != r.remaining()) {
    throw FormatError(rows * (4 + cols * 4) > r.remaining() ? FormatErrorCode::kTruncated : FormatErrorCode::kTrailingData,
                      "feature payload size disagrees with " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  FeatureDump dump;
  dump.labels.resize(rows);
  for (auto& label : dump.labels) label = r.get_u32();
  dump.features = Tensor::matrix(rows, cols);
  for (double& v : dump.features.data()) v = static_cast<double>(r.get_f32());
  return dump;
}

void write_features(const FeatureDump& dump, const std::filesystem::path& path) {
  data::write_file(path, encode_features(dump));
}

FeatureDump read_features(const std::filesystem::path& path) { return decode_features(data::read_file(path)); }

}  // namespace hmgrl::engine
