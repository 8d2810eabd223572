#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "psgnn/errors.hpp"

// Little-endian binary streams shared by the dataset and checkpoint formats.

namespace psgnn {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  void put_bytes(const void* data, std::size_t size) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size)); }

  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }

  bool good() const { return out_.good(); }

 private:
  std::ostream& out_;
};

/// Reader that tracks its byte offset so decoding failures can say where
/// they happened.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in, std::uint64_t start_offset = 0) : in_(in), offset_(start_offset) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get(const char* what) {
    T value{};
    get_bytes(&value, sizeof(T), what);
    return value;
  }

  void get_bytes(void* dst, std::size_t size, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size) {
      throw FormatError(std::string("truncated file while reading ") + what, offset_ + static_cast<std::uint64_t>(in_.gcount()));
    }
    offset_ += size;
  }

  std::string get_string(const char* what, std::uint32_t max_len = 4096) {
    const auto at = offset_;
    const auto len = get<std::uint32_t>(what);
    if (len > max_len) throw FormatError(std::string("implausible length for ") + what, at);
    std::string s(len, '\0');
    get_bytes(s.data(), len, what);
    return s;
  }

  void skip(std::uint64_t size, const char* what) {
    in_.seekg(static_cast<std::streamoff>(size), std::ios::cur);
    if (!in_) throw FormatError(std::string("truncated file while skipping ") + what, offset_);
    offset_ += size;
  }

  std::uint64_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::uint64_t offset_;
};

}  // namespace psgnn
