#pragma once

#include "icaclf/config.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

#include "icaclf/error.hpp"

namespace icaclf::inline ICACLF_ABI::le {

template <typename T>
T byteswap_if_big(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <typename T>
void append(std::string& out, T value) {
  value = byteswap_if_big(value);
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

/// Sequential little-endian reader over an in-memory buffer.
class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T read() {
    T value;
    std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
    return byteswap_if_big(value);
  }

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) {
      throw TruncationError("unexpected end of data: wanted " + std::to_string(n) + " bytes, " +
                            std::to_string(bytes_.size() - pos_) + " left");
    }
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace icaclf::le
