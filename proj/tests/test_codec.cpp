#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pairsat/crc.hpp"
#include "pairsat/error.hpp"
#include "pairsat/onboard_file.hpp"
#include "pairsat/telemetry.hpp"

using namespace pairsat;
using namespace pairsat::payload;

namespace {

// Independent little/big-endian readers.
std::uint64_t le(std::span<const std::uint8_t> b, std::size_t off, int n) {
  std::uint64_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | b[off + i];
  return v;
}

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

template <class T>
T draw(std::mt19937_64& rng) {
  return static_cast<T>(rng());
}

SettingRecord random_record(std::mt19937_64& rng) {
  SettingRecord r;
  r.setting_index = draw<std::uint8_t>(rng);
  r.angle_centideg = draw<std::uint16_t>(rng);
  r.integration_ms = draw<std::uint16_t>(rng);
  r.s1 = draw<std::uint32_t>(rng);
  r.s2 = draw<std::uint32_t>(rng);
  r.coinc = draw<std::uint32_t>(rng);
  r.t1_centi_c = draw<std::int16_t>(rng);
  r.t2_centi_c = draw<std::int16_t>(rng);
  r.hv_mv = draw<std::int16_t>(rng);
  r.flags = draw<std::uint8_t>(rng);
  return r;
}

OnboardFile random_file(std::mt19937_64& rng) {
  OnboardFile f;
  f.header.profile_id = draw<std::uint8_t>(rng);
  f.header.start_epoch_s = draw<std::int64_t>(rng);
  f.header.bias_mv = draw<std::int16_t>(rng);
  f.header.config_hash = draw<std::uint32_t>(rng);
  f.header.flags = draw<std::uint8_t>(rng);
  f.header.heating_s = draw<std::uint16_t>(rng);
  const std::size_t runs = rng() % 60;
  std::size_t darks = rng() % 1400;
  while (!fits_in_file(darks, runs)) darks /= 2;
  for (std::size_t i = 0; i < darks; ++i) f.dark_records.push_back(random_record(rng));
  for (std::size_t i = 0; i < runs; ++i) {
    RunRecord r;
    r.seq = draw<std::uint16_t>(rng);
    r.epoch_offset_s = draw<std::uint32_t>(rng);
    r.pump_centi_mw = draw<std::uint16_t>(rng);
    r.flags = draw<std::uint8_t>(rng);
    for (auto& s : r.settings) s = random_record(rng);
    f.runs.push_back(r);
  }
  return f;
}

std::string decode_error(std::span<const std::uint8_t> image) {
  try {
    decode_file(image);
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(OnboardFile, RoundTripRandomInstances) {
  std::mt19937_64 rng(2015);
  for (int i = 0; i < 1000; ++i) {
    const auto f = random_file(rng);
    const auto image = encode_file(f);
    ASSERT_EQ(image.size(), kFileSize);
    ASSERT_EQ(decode_file(image), f) << "instance " << i;
    ASSERT_EQ(encode_file(decode_file(image)), image);
  }
}

TEST(OnboardFile, LayoutFields) {
  OnboardFile f;
  f.header.profile_id = 0x10;
  f.header.start_epoch_s = 0x0102030405060708;
  f.header.config_hash = 0xA1B2C3D4;
  f.dark_records.resize(2);
  f.runs.resize(1);
  f.runs[0].settings[3].s1 = 0x11223344;
  const auto img = encode_file(f);
  EXPECT_EQ(std::string(img.begin(), img.begin() + 4), "GLSQ");
  EXPECT_EQ(img[4], kFileVersion);
  EXPECT_EQ(img[5], 0x10);
  EXPECT_EQ(le(img, 6, 8), 0x0102030405060708u);
  EXPECT_EQ(le(img, 16, 2), 1u);
  EXPECT_EQ(le(img, 18, 2), 2u);
  EXPECT_EQ(le(img, 20, 4), 0xA1B2C3D4u);
  EXPECT_EQ(le(img, 56, 4), crc32(std::span(img).first(56)));
  EXPECT_EQ(le(img, 60, 4), crc32(std::span(img).subspan(64)));
  const std::size_t run0 = kHeaderSize + 2 * kSettingRecordSize;
  EXPECT_EQ(le(img, run0 + kRunHeaderSize + 3 * kSettingRecordSize + 5, 4),
            0x11223344u);
  const std::size_t end = run0 + kRunRecordSize;
  EXPECT_TRUE(std::all_of(img.begin() + end, img.end(), [](auto b) { return b == 0xFF; }));
}

TEST(OnboardFile, Capacity) {
  EXPECT_TRUE(fits_in_file(0, (kFileSize - kHeaderSize) / kRunRecordSize));
  EXPECT_FALSE(fits_in_file(0, (kFileSize - kHeaderSize) / kRunRecordSize + 1));
  EXPECT_TRUE(fits_in_file(1380, 0));
  EXPECT_TRUE(fits_in_file(180, 45));
  OnboardFile f;
  f.runs.resize(200);
  EXPECT_THROW(encode_file(f), Error);
}

TEST(OnboardFile, EverySingleByteCorruptionDetected) {
  std::mt19937_64 rng(7);
  const auto f = random_file(rng);
  const auto image = encode_file(f);
  for (std::size_t pos = 0; pos < image.size(); ++pos) {
    auto bad = image;
    bad[pos] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    ASSERT_NE(decode_error(bad), "") << "byte " << pos;
  }
}

TEST(OnboardFile, DecodeErrors) {
  const auto image = encode_file(OnboardFile{});
  EXPECT_EQ(decode_error(std::span(image).first(1000)), "truncated");
  EXPECT_EQ(decode_error({}), "truncated");
  auto longer = image;
  longer.push_back(0);
  EXPECT_EQ(decode_error(longer), "bad_size");
  auto magic = image;
  magic[0] = 'X';
  EXPECT_EQ(decode_error(magic), "bad_magic");
  auto payload = image;
  payload[5000] ^= 1;
  EXPECT_EQ(decode_error(payload), "crc_mismatch");
}

// --- frames ------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> random_image(std::mt19937_64& rng) { return encode_file(random_file(rng)); }

std::string frame_error(std::span<const std::uint8_t> bytes) {
  try {
    link::decode_frame(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(Frames, FramesPerFile) {
  EXPECT_EQ(link::frames_per_file(kFileSize), 274u);
  EXPECT_NEAR(link::kFrameAirtimeS, 1.68, 1e-12);
  std::mt19937_64 rng(3);
  const auto frames = link::frame_file(random_image(rng), 9);
  ASSERT_EQ(frames.size(), 274u);
  EXPECT_EQ(frames.back().payload_len, 16);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) EXPECT_EQ(frames[i].payload_len, 240);
  EXPECT_THROW(link::frame_file(std::vector<std::uint8_t>(100), 1), Error);
}

TEST(Frames, WireFormat) {
  link::TelemetryFrame f;
  f.file_id = 0x1234;
  f.seq = 0x0102;
  f.payload_len = 3;
  f.payload[0] = 0xAA;
  const auto raw = link::encode_frame(f);
  EXPECT_EQ(raw[0], 0x1A);
  EXPECT_EQ(raw[1], 0xCF);
  EXPECT_EQ(raw[2], 0xFC);
  EXPECT_EQ(raw[3], 0x1D);
  EXPECT_EQ(raw[4], 0x10);
  EXPECT_EQ(raw[5], 0x12);
  EXPECT_EQ(raw[6], 0x34);
  EXPECT_EQ(raw[7], 0x01);
  EXPECT_EQ(raw[8], 0x02);
  EXPECT_EQ(raw[9], 3);
  EXPECT_EQ(raw[10], 0xAA);
  EXPECT_EQ(be16(raw, 250), crc16_ccitt_false(std::span(raw).subspan(4, 246)));
}

TEST(Frames, RoundTripRandomInstances) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    link::TelemetryFrame f;
    f.file_id = draw<std::uint16_t>(rng);
    f.seq = draw<std::uint16_t>(rng);
    f.payload_len = static_cast<std::uint8_t>(rng() % 241);
    for (std::size_t k = 0; k < f.payload_len; ++k) f.payload[k] = draw<std::uint8_t>(rng);
    const auto raw = link::encode_frame(f);
    ASSERT_EQ(link::decode_frame(raw), f);
  }
}

TEST(Frames, FileRoundTripThroughStream) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 20; ++i) {
    const auto image = random_image(rng);
    std::vector<std::uint8_t> stream;
    for (const auto& f : link::frame_file(image, 5)) {
      const auto raw = link::encode_frame(f);
      stream.insert(stream.end(), raw.begin(), raw.end());
    }
    link::FrameStreamDecoder dec;
    dec.push(stream);
    const auto frames = dec.take_frames();
    const auto result = link::reassemble(frames, 5);
    ASSERT_TRUE(result.file);
    EXPECT_EQ(*result.file, image);
  }
}

TEST(Frames, EverySingleByteCorruptionDetected) {
  std::mt19937_64 rng(13);
  link::TelemetryFrame f;
  f.payload_len = 240;
  for (auto& b : f.payload) b = draw<std::uint8_t>(rng);
  const auto raw = link::encode_frame(f);
  for (std::size_t pos = 0; pos < raw.size(); ++pos) {
    for (int v = 1; v < 256; ++v) {
      auto bad = raw;
      bad[pos] ^= static_cast<std::uint8_t>(v);
      ASSERT_NE(frame_error(bad), "") << pos << " " << v;
    }
  }
}

TEST(Frames, LowWeightBitErrorsDetected) {
  // CRC-16/CCITT has Hamming distance 4 at this length: 1 to 3 flipped bits
  // can never pass.
  std::mt19937_64 rng(14);
  link::TelemetryFrame f;
  f.payload_len = 240;
  for (auto& b : f.payload) b = draw<std::uint8_t>(rng);
  const auto raw = link::encode_frame(f);
  for (int trial = 0; trial < 1000000; ++trial) {
    auto bad = raw;
    const int flips = 1 + static_cast<int>(rng() % 3);
    std::size_t positions[3];
    for (int k = 0; k < flips; ++k) {
      bool fresh;
      do {
        positions[k] = rng() % (link::kFrameSize * 8);
        fresh = true;
        for (int j = 0; j < k; ++j) fresh &= positions[j] != positions[k];
      } while (!fresh);
      bad[positions[k] / 8] ^= static_cast<std::uint8_t>(1u << (positions[k] % 8));
    }
    ASSERT_NE(frame_error(bad), "") << "trial " << trial;
  }
}

TEST(Frames, DecodeErrors) {
  const auto raw = link::encode_frame(link::TelemetryFrame{});
  EXPECT_EQ(frame_error(std::span(raw).first(100)), "truncated");
  EXPECT_EQ(frame_error(std::span(raw).first(2)), "truncated");
  auto nosync = raw;
  nosync[0] = 0;
  EXPECT_EQ(frame_error(nosync), "no_sync");
  auto crc = raw;
  crc[100] ^= 0x40;
  EXPECT_EQ(frame_error(crc), "crc_mismatch");
}

TEST(Frames, StreamResyncsAfterGarbage) {
  std::vector<std::uint8_t> stream;
  for (std::uint16_t s = 0; s < 4; ++s) {
    link::TelemetryFrame f;
    f.seq = s;
    f.payload_len = 1;
    f.payload[0] = static_cast<std::uint8_t>(s);
    const auto raw = link::encode_frame(f);
    stream.insert(stream.end(), raw.begin(), raw.end());
    if (s == 1) stream.insert(stream.end(), {0x1A, 0xCF, 0x00});
  }
  link::FrameStreamDecoder dec;
  // Feed in awkward chunk sizes.
  for (std::size_t i = 0; i < stream.size(); i += 37)
    dec.push(std::span(stream).subspan(i, std::min<std::size_t>(37, stream.size() - i)));
  const auto frames = dec.take_frames();
  ASSERT_EQ(frames.size(), 4u);
  for (std::uint16_t s = 0; s < 4; ++s) EXPECT_EQ(frames[s].seq, s);
  EXPECT_EQ(dec.skipped_bytes(), 3u);
}

TEST(Frames, StreamSkipsCorruptFrame) {
  std::vector<std::uint8_t> stream;
  for (std::uint16_t s = 0; s < 3; ++s) {
    link::TelemetryFrame f;
    f.seq = s;
    auto raw = link::encode_frame(f);
    if (s == 1) raw[50] ^= 0xFF;
    stream.insert(stream.end(), raw.begin(), raw.end());
  }
  link::FrameStreamDecoder dec;
  dec.push(stream);
  const auto frames = dec.take_frames();
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0].seq, 0);
  EXPECT_EQ(frames[1].seq, 2);
  EXPECT_GE(dec.rejected(), 1u);
}

TEST(Frames, ReassemblyReportsGaps) {
  std::mt19937_64 rng(15);
  const auto image = random_image(rng);
  auto frames = link::frame_file(image, 2);
  std::vector<link::TelemetryFrame> partial;
  for (const auto& f : frames)
    if (f.seq != 5 && f.seq != 200) partial.push_back(f);
  std::shuffle(partial.begin(), partial.end(), rng);
  auto result = link::reassemble(partial, 2);
  EXPECT_FALSE(result.file);
  EXPECT_EQ(result.missing, (std::vector<std::uint16_t>{5, 200}));

  partial.push_back(frames[5]);
  partial.push_back(frames[200]);
  partial.push_back(frames[7]);  // identical duplicate is fine
  result = link::reassemble(partial, 2);
  ASSERT_TRUE(result.file);
  EXPECT_EQ(*result.file, image);

  auto conflicting = frames[9];
  conflicting.payload[0] ^= 1;
  partial.push_back(conflicting);
  try {
    link::reassemble(partial, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "integrity_error");
  }
  EXPECT_THROW(link::reassemble(partial, 3), Error);
}
