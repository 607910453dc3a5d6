#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <type_traits>

namespace pairsat::bytes {

template <typename T>
void put_le(std::span<std::uint8_t> out, std::size_t offset, T value) {
  using U = std::make_unsigned_t<T>;
  auto v = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out[offset + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  using U = std::make_unsigned_t<T>;
  U v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<U>(static_cast<U>(in[offset + i]) << (8 * i));
  return static_cast<T>(v);
}

template <typename T>
void put_be(std::span<std::uint8_t> out, std::size_t offset, T value) {
  using U = std::make_unsigned_t<T>;
  auto v = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out[offset + i] = static_cast<std::uint8_t>(v >> (8 * (sizeof(T) - 1 - i)));
}

template <typename T>
T get_be(std::span<const std::uint8_t> in, std::size_t offset) {
  using U = std::make_unsigned_t<T>;
  U v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v = static_cast<U>((v << 8) | in[offset + i]);
  return static_cast<T>(v);
}

}  // namespace pairsat::bytes
