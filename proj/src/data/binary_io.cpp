#include "hmgrl/data/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace hmgrl::data {

std::string_view to_string(FormatErrorCode code) {
  switch (code) {
    case FormatErrorCode::kIo: return "io_error";
    case FormatErrorCode::kBadMagic: return "bad_magic";
    case FormatErrorCode::kVersionMismatch: return "version_mismatch";
    case FormatErrorCode::kTruncated: return "truncated";
    case FormatErrorCode::kBadHeader: return "bad_header";
    case FormatErrorCode::kInconsistentWidth: return "inconsistent_width";
    case FormatErrorCode::kTrailingData: return "trailing_data";
    case FormatErrorCode::kValidation: return "validation";
  }
  return "unknown";
}

void ByteWriter::put_u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void ByteWriter::put_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void ByteWriter::put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::put_string(std::string_view s) {
  put_u32(static_cast<std::uint32_t>(s.size()));
  put_bytes(s);
}

std::string_view ByteReader::get_bytes(std::size_t n) {
  if (remaining() < n) {
    throw FormatError(FormatErrorCode::kTruncated, "needed " + std::to_string(n) + " bytes at offset " +
                                                       std::to_string(pos_) + ", " +
                                                       std::to_string(remaining()) + " left");
  }
  auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::get_u32() {
  const auto b = get_bytes(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t ByteReader::get_u64() {
  const auto b = get_bytes(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

float ByteReader::get_f32() { return std::bit_cast<float>(get_u32()); }
double ByteReader::get_f64() { return std::bit_cast<double>(get_u64()); }

std::string ByteReader::get_string() {
  const std::uint32_t n = get_u32();
  return std::string(get_bytes(n));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace hmgrl::data
