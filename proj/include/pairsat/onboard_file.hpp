#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pairsat::payload {

/// Fixed-size experiment data file written by the payload at the end of a
/// profile. All multi-byte fields are little-endian.
///
///   header (64 B)
///     0  magic "GLSQ"            4
///     4  version                 1
///     5  profile id              1
///     6  start epoch, s          8  (int64, seconds since launch)
///     14 bias, mV                2  (int16)
///     16 run count               2
///     18 dark-record count       2
///     20 config hash             4
///     24 header flags            1  (bit0: heating budget expired)
///     25 reserved                1
///     26 heating duration, s     2
///     28 reserved (zero)        28
///     56 CRC-32 of bytes 0..55   4
///     60 CRC-32 of bytes 64..65535  4
///   dark records   (dark count x 24 B SettingRecord), then
///   run records    (run count x (16 B run header + 16 x 24 B SettingRecord)),
///   then 0xFF padding to 65,536 bytes.
///
///   run header: seq 2, epoch offset s 4, pump centi-mW 2, flags 1, reserved 7
///   setting record: index 1, angle centideg 2, integration ms 2, s1 4, s2 4,
///     coinc 4, t1 centi-C 2 (int16), t2 centi-C 2 (int16), hv mV 2 (int16), flags 1
inline constexpr std::size_t kFileSize = 65536;
inline constexpr std::size_t kHeaderSize = 64;
inline constexpr std::size_t kRunHeaderSize = 16;
inline constexpr std::size_t kSettingRecordSize = 24;
inline constexpr std::size_t kSettingsPerRun = 16;
inline constexpr std::size_t kRunRecordSize = kRunHeaderSize + kSettingsPerRun * kSettingRecordSize;
inline constexpr std::uint8_t kFileVersion = 1;

namespace record_flags {
inline constexpr std::uint8_t mode_hop_dropout = 0x01;
inline constexpr std::uint8_t saturated_1 = 0x02;
inline constexpr std::uint8_t saturated_2 = 0x04;
inline constexpr std::uint8_t dark_phase = 0x08;
}  // namespace record_flags

namespace header_flags {
inline constexpr std::uint8_t heating_timeout = 0x01;
}  // namespace header_flags

struct SettingRecord {
  std::uint8_t setting_index = 0;
  std::uint16_t angle_centideg = 0;
  std::uint16_t integration_ms = 1000;
  std::uint32_t s1 = 0;
  std::uint32_t s2 = 0;
  std::uint32_t coinc = 0;
  std::int16_t t1_centi_c = 0;
  std::int16_t t2_centi_c = 0;
  std::int16_t hv_mv = 0;
  std::uint8_t flags = 0;

  bool operator==(const SettingRecord&) const = default;
};

struct RunRecord {
  std::uint16_t seq = 0;
  std::uint32_t epoch_offset_s = 0;
  std::uint16_t pump_centi_mw = 0;
  std::uint8_t flags = 0;
  std::array<SettingRecord, kSettingsPerRun> settings{};

  bool operator==(const RunRecord&) const = default;
};

struct FileHeader {
  std::uint8_t version = kFileVersion;
  std::uint8_t profile_id = 0;
  std::int64_t start_epoch_s = 0;
  std::int16_t bias_mv = 0;
  std::uint32_t config_hash = 0;
  std::uint8_t flags = 0;
  std::uint16_t heating_s = 0;

  bool operator==(const FileHeader&) const = default;
};

struct OnboardFile {
  FileHeader header;
  std::vector<SettingRecord> dark_records;
  std::vector<RunRecord> runs;

  bool operator==(const OnboardFile&) const = default;
};

/// True when the records fit in the 65,536-byte image.
bool fits_in_file(std::size_t dark_records, std::size_t runs);

/// Throws pairsat::Error("capacity_exceeded") when the records do not fit.
std::vector<std::uint8_t> encode_file(const OnboardFile& file);

/// Throws pairsat::Error with code truncated, bad_size, bad_magic,
/// unsupported_version, crc_mismatch or corrupt.
OnboardFile decode_file(std::span<const std::uint8_t> image);

}  // namespace pairsat::payload
