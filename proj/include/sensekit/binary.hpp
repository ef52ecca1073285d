#pragma once

// Little-endian encoding helpers shared by the model and teacher file formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "sensekit/error.hpp"

namespace sensekit {

using Digest = std::array<std::uint8_t, 16>;

/// MD5 of a byte string.
Digest md5(std::string_view bytes);
std::string to_hex(const Digest& digest);

/// Reads a whole file; throws FormatError(kIo) naming the path.
std::string read_file(const std::filesystem::path& path);

/// Writes to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buf_.append(raw, sizeof(T));
  }

  void put_bytes(std::string_view bytes) { buf_.append(bytes); }

  template <std::size_t N>
  void put_bytes(const std::array<std::uint8_t, N>& bytes) {
    buf_.append(reinterpret_cast<const char*>(bytes.data()), N);
  }

  void reserve(std::size_t n) { buf_.reserve(n); }
  const std::string& bytes() const { return buf_; }
  std::size_t size() const { return buf_.size(); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string source) : data_(data), source_(std::move(source)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view get_bytes(std::size_t n) {
    require(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> get_array() {
    std::array<std::uint8_t, N> out{};
    auto raw = get_bytes(N);
    std::memcpy(out.data(), raw.data(), N);
    return out;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& source() const { return source_; }

  void require(std::size_t n) const {
    if (remaining() < n) {
      throw FormatError(FormatError::Kind::kTruncated,
                        source_ + ": truncated at byte " + std::to_string(pos_) + " (need " +
                            std::to_string(n) + ", have " + std::to_string(remaining()) + ")");
    }
  }

 private:
  std::string_view data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace sensekit
