#include "pairsat/crc.hpp"

#include <array>

namespace pairsat {

namespace {

constexpr std::array<std::uint32_t, 256> make_crc32_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1U) ? 0xEDB88320U ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

constexpr std::array<std::uint16_t, 256> make_crc16_table() {
  std::array<std::uint16_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    auto c = static_cast<std::uint16_t>(i << 8);
    for (int k = 0; k < 8; ++k)
      c = (c & 0x8000U) ? static_cast<std::uint16_t>((c << 1) ^ 0x1021U)
                        : static_cast<std::uint16_t>(c << 1);
    table[i] = c;
  }
  return table;
}

constexpr auto kCrc32Table = make_crc32_table();
constexpr auto kCrc16Table = make_crc16_table();

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  std::uint32_t crc = 0xFFFFFFFFU;
  for (auto byte : data) crc = kCrc32Table[(crc ^ byte) & 0xFFU] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFU;
}

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) {
  std::uint16_t crc = 0xFFFF;
  for (auto byte : data)
    crc = static_cast<std::uint16_t>((crc << 8) ^ kCrc16Table[((crc >> 8) ^ byte) & 0xFFU]);
  return crc;
}

}  // namespace pairsat
