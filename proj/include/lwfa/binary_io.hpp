#pragma once

// Little-endian byte buffers shared by the model, dataset and firewall file
// formats.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "lwfa/error.hpp"

namespace lwfa::io {

class ByteWriter {
 public:
  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }

  template <class T>
  void put_array(std::span<const T> values) {
    put<std::uint64_t>(values.size());
    for (const T& v : values) put(v);
  }

  void put_magic(std::string_view magic) { bytes_.insert(bytes_.end(), magic.begin(), magic.end()); }

  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  template <class T>
  std::vector<T> get_array(std::uint64_t max_count = (1ull << 32)) {
    const auto n = get<std::uint64_t>();
    if (n > max_count || n * sizeof(T) > remaining()) fail("array length out of bounds");
    std::vector<T> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = get<T>();
    return out;
  }

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) fail("bad magic header");
    pos_ += magic.size();
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void expect_end() {
    if (remaining() != 0) fail("trailing bytes");
  }

  [[noreturn]] void fail(const std::string& why) const { throw DataError(what_ + ": " + why); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) fail("truncated file");
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace lwfa::io
