#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hmgrl::data {

enum class FormatErrorCode {
  kIo,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kBadHeader,
  kInconsistentWidth,
  kTrailingData,
  kValidation,
};

std::string_view to_string(FormatErrorCode code);

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}
  FormatErrorCode code() const { return code_; }

 private:
  FormatErrorCode code_;
};

/// Little-endian encoder into an in-memory byte string.
class ByteWriter {
 public:
  void put_bytes(std::string_view bytes) { out_.append(bytes); }
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f32(float v);
  void put_f64(double v);
  /// u32 length prefix followed by the bytes.
  void put_string(std::string_view s);

  const std::string& bytes() const { return out_; }

 private:
  std::string out_;
};

/// Little-endian decoder; running past the end raises kTruncated.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view get_bytes(std::size_t n);
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  float get_f32();
  double get_f64();
  std::string get_string();

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace hmgrl::data
