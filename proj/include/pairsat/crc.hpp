#pragma once

#include <cstdint>
#include <span>

namespace pairsat {

/// CRC-32/ISO-HDLC (reflected poly 0x04C11DB7, init/xorout 0xFFFFFFFF).
/// Check value for "123456789" is 0xCBF43926.
std::uint32_t crc32(std::span<const std::uint8_t> data);

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection, no xorout).
/// Check value for "123456789" is 0x29B1.
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data);

}  // namespace pairsat
