#include "pairsat/onboard_file.hpp"

#include <algorithm>
#include <string>

#include "pairsat/bytes.hpp"
#include "pairsat/crc.hpp"
#include "pairsat/error.hpp"

namespace pairsat::payload {

namespace {

using bytes::get_le;
using bytes::put_le;

constexpr std::array<std::uint8_t, 4> kMagic{'G', 'L', 'S', 'Q'};
constexpr std::size_t kHeaderCrcOffset = 56;
constexpr std::size_t kPayloadCrcOffset = 60;

void write_setting(std::span<std::uint8_t> out, std::size_t at, const SettingRecord& r) {
  put_le<std::uint8_t>(out, at + 0, r.setting_index);
  put_le<std::uint16_t>(out, at + 1, r.angle_centideg);
  put_le<std::uint16_t>(out, at + 3, r.integration_ms);
  put_le<std::uint32_t>(out, at + 5, r.s1);
  put_le<std::uint32_t>(out, at + 9, r.s2);
  put_le<std::uint32_t>(out, at + 13, r.coinc);
  put_le<std::int16_t>(out, at + 17, r.t1_centi_c);
  put_le<std::int16_t>(out, at + 19, r.t2_centi_c);
  put_le<std::int16_t>(out, at + 21, r.hv_mv);
  put_le<std::uint8_t>(out, at + 23, r.flags);
}

SettingRecord read_setting(std::span<const std::uint8_t> in, std::size_t at) {
  SettingRecord r;
  r.setting_index = get_le<std::uint8_t>(in, at + 0);
  r.angle_centideg = get_le<std::uint16_t>(in, at + 1);
  r.integration_ms = get_le<std::uint16_t>(in, at + 3);
  r.s1 = get_le<std::uint32_t>(in, at + 5);
  r.s2 = get_le<std::uint32_t>(in, at + 9);
  r.coinc = get_le<std::uint32_t>(in, at + 13);
  r.t1_centi_c = get_le<std::int16_t>(in, at + 17);
  r.t2_centi_c = get_le<std::int16_t>(in, at + 19);
  r.hv_mv = get_le<std::int16_t>(in, at + 21);
  r.flags = get_le<std::uint8_t>(in, at + 23);
  return r;
}

}  // namespace

bool fits_in_file(std::size_t dark_records, std::size_t runs) {
  if (dark_records > 0xFFFF || runs > 0xFFFF) return false;
  return kHeaderSize + dark_records * kSettingRecordSize + runs * kRunRecordSize <= kFileSize;
}

std::vector<std::uint8_t> encode_file(const OnboardFile& file) {
  if (!fits_in_file(file.dark_records.size(), file.runs.size()))
    throw Error("capacity_exceeded", "records do not fit in the 64 KiB file");

  std::vector<std::uint8_t> image(kFileSize, 0xFF);
  std::span<std::uint8_t> out(image);
  std::fill_n(image.begin(), kHeaderSize, std::uint8_t{0});

  std::copy(kMagic.begin(), kMagic.end(), image.begin());
  const auto& h = file.header;
  put_le<std::uint8_t>(out, 4, h.version);
  put_le<std::uint8_t>(out, 5, h.profile_id);
  put_le<std::int64_t>(out, 6, h.start_epoch_s);
  put_le<std::int16_t>(out, 14, h.bias_mv);
  put_le<std::uint16_t>(out, 16, static_cast<std::uint16_t>(file.runs.size()));
  put_le<std::uint16_t>(out, 18, static_cast<std::uint16_t>(file.dark_records.size()));
  put_le<std::uint32_t>(out, 20, h.config_hash);
  put_le<std::uint8_t>(out, 24, h.flags);
  put_le<std::uint16_t>(out, 26, h.heating_s);

  std::size_t at = kHeaderSize;
  for (const auto& r : file.dark_records) {
    write_setting(out, at, r);
    at += kSettingRecordSize;
  }
  for (const auto& run : file.runs) {
    std::fill_n(image.begin() + static_cast<std::ptrdiff_t>(at), kRunHeaderSize, std::uint8_t{0});
    put_le<std::uint16_t>(out, at + 0, run.seq);
    put_le<std::uint32_t>(out, at + 2, run.epoch_offset_s);
    put_le<std::uint16_t>(out, at + 6, run.pump_centi_mw);
    put_le<std::uint8_t>(out, at + 8, run.flags);
    at += kRunHeaderSize;
    for (const auto& r : run.settings) {
      write_setting(out, at, r);
      at += kSettingRecordSize;
    }
  }

  put_le<std::uint32_t>(out, kHeaderCrcOffset, crc32(out.first(kHeaderCrcOffset)));
  put_le<std::uint32_t>(out, kPayloadCrcOffset, crc32(out.subspan(kHeaderSize)));
  return image;
}

OnboardFile decode_file(std::span<const std::uint8_t> in) {
  if (in.size() < kFileSize)
    throw Error("truncated", "file image is " + std::to_string(in.size()) + " bytes, expected 65536");
  if (in.size() > kFileSize)
    throw Error("bad_size", "file image is " + std::to_string(in.size()) + " bytes, expected 65536");
  if (!std::equal(kMagic.begin(), kMagic.end(), in.begin()))
    throw Error("bad_magic", "file image does not start with GLSQ");
  if (get_le<std::uint32_t>(in, kHeaderCrcOffset) != crc32(in.first(kHeaderCrcOffset)))
    throw Error("crc_mismatch", "header CRC mismatch");
  if (get_le<std::uint32_t>(in, kPayloadCrcOffset) != crc32(in.subspan(kHeaderSize)))
    throw Error("crc_mismatch", "payload CRC mismatch");

  OnboardFile file;
  auto& h = file.header;
  h.version = get_le<std::uint8_t>(in, 4);
  if (h.version != kFileVersion)
    throw Error("unsupported_version", "unsupported file version " + std::to_string(h.version));
  h.profile_id = get_le<std::uint8_t>(in, 5);
  h.start_epoch_s = get_le<std::int64_t>(in, 6);
  h.bias_mv = get_le<std::int16_t>(in, 14);
  const auto runs = get_le<std::uint16_t>(in, 16);
  const auto darks = get_le<std::uint16_t>(in, 18);
  h.config_hash = get_le<std::uint32_t>(in, 20);
  h.flags = get_le<std::uint8_t>(in, 24);
  h.heating_s = get_le<std::uint16_t>(in, 26);
  if (!fits_in_file(darks, runs)) throw Error("corrupt", "record counts exceed file capacity");

  std::size_t at = kHeaderSize;
  file.dark_records.reserve(darks);
  for (std::size_t i = 0; i < darks; ++i, at += kSettingRecordSize)
    file.dark_records.push_back(read_setting(in, at));
  file.runs.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    RunRecord run;
    run.seq = get_le<std::uint16_t>(in, at + 0);
    run.epoch_offset_s = get_le<std::uint32_t>(in, at + 2);
    run.pump_centi_mw = get_le<std::uint16_t>(in, at + 6);
    run.flags = get_le<std::uint8_t>(in, at + 8);
    at += kRunHeaderSize;
    for (auto& r : run.settings) {
      r = read_setting(in, at);
      at += kSettingRecordSize;
    }
    file.runs.push_back(run);
  }
  return file;
}

}  // namespace pairsat::payload
