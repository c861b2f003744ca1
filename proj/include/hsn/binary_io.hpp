#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsn/error.hpp"

namespace hsn::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with native little-endian stores");

uint32_t crc32(std::span<const uint8_t> bytes);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const uint8_t*>(&value);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  void put_bytes(std::span<const uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void put_string(std::string_view s) {
    put(static_cast<uint16_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  /// Appends the CRC32 of everything written since `from`.
  void put_crc(size_t from) { put(crc32(std::span(buf_).subspan(from))); }

  size_t size() const { return buf_.size(); }
  const std::vector<uint8_t>& bytes() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<uint8_t> buf_;
};

/// Bounds-checked little-endian reader; truncation raises FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const uint8_t> get_bytes(size_t n) {
    require(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::string get_string() {
    auto n = get<uint16_t>();
    auto b = get_bytes(n);
    return std::string(b.begin(), b.end());
  }

  /// Reads a CRC32 and checks it against the bytes in [from, current).
  void check_crc(size_t from, std::string_view section) {
    const uint32_t expected = crc32(bytes_.subspan(from, pos_ - from));
    const auto stored = get<uint32_t>();
    if (stored != expected) throw FormatError("checksum mismatch in section '" + std::string(section) + "'");
  }

  size_t position() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void require(size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("unexpected end of data (truncated file)");
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace hsn::io
