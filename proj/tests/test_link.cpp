#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

#include "pairsat/error.hpp"
#include "pairsat/onboard_file.hpp"
#include "pairsat/rng.hpp"
#include "pairsat/telemetry.hpp"

using namespace pairsat;

namespace {

std::vector<std::uint8_t> sample_image(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  payload::OnboardFile f;
  f.header.profile_id = 0x10;
  f.dark_records.resize(180);
  f.runs.resize(45);
  for (auto& r : f.dark_records) r.s1 = static_cast<std::uint32_t>(rng());
  for (auto& run : f.runs)
    for (auto& s : run.settings) s.coinc = static_cast<std::uint32_t>(rng());
  return payload::encode_file(f);
}

bool decodes(std::span<const std::uint8_t> image) {
  try {
    payload::decode_file(image);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::vector<env::Pass> passes(int n, std::int64_t length_s) {
  std::vector<env::Pass> out;
  for (int i = 0; i < n; ++i) out.push_back({i * 6000LL, i * 6000LL + length_s, 45.0});
  return out;
}

}  // namespace

TEST(Link, NoiselessTransferTiming) {
  const auto image = sample_image(1);
  auto rng = make_substream(1, "channel");
  const auto out = link::simulate_downlink(link::frame_file(image, 1), passes(1, 600), 0.0, rng, decodes);
  ASSERT_TRUE(out.file);
  EXPECT_EQ(*out.file, image);
  EXPECT_EQ(out.session.frames_sent, 274u);
  EXPECT_EQ(out.session.frames_lost, 0u);
  EXPECT_EQ(out.session.bits_on_air, 274u * 252u * 8u);
  EXPECT_NEAR(out.session.on_air_s(), 460.32, 1e-9);
  EXPECT_NEAR(out.session.completed_at, 460.32, 1e-6);
  EXPECT_EQ(out.session.passes_used.size(), 1u);
}

TEST(Link, SpansPassesWithoutOverrunningLos) {
  const auto image = sample_image(2);
  auto rng = make_substream(2, "channel");
  const auto ps = passes(4, 200);
  const auto out = link::simulate_downlink(link::frame_file(image, 1), ps, 0.0, rng);
  ASSERT_TRUE(out.file);
  ASSERT_EQ(out.session.passes_used.size(), 3u);
  for (std::size_t i = 0; i < out.session.passes_used.size(); ++i) {
    const auto& u = out.session.passes_used[i];
    EXPECT_GE(u.start, static_cast<double>(ps[i].aos_epoch));
    EXPECT_LE(u.end, static_cast<double>(ps[i].los_epoch) + 1e-9);
  }
  EXPECT_EQ(out.session.frames_sent, 274u);
}

TEST(Link, IncompleteWhenPassesRunOut) {
  auto rng = make_substream(3, "channel");
  const auto out = link::simulate_downlink(link::frame_file(sample_image(3), 1), passes(1, 100), 0.0, rng);
  EXPECT_FALSE(out.file);
  EXPECT_EQ(out.received.size(), 59u);  // floor(100 / 1.68)
}

TEST(Link, NoisyChannelDeliversExactFile) {
  const auto image = sample_image(4);
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    auto rng = make_substream(trial, "channel");
    const auto out = link::simulate_downlink(link::frame_file(image, 1), passes(40, 500), 1e-3, rng, decodes);
    ASSERT_TRUE(out.file) << trial;
    EXPECT_EQ(*out.file, image);
    EXPECT_GT(out.session.frames_lost, 0u);
    EXPECT_GE(out.session.frames_acked, 274u);
    EXPECT_GE(out.session.frames_sent, out.session.frames_lost + 274u);
  }
}

TEST(Link, FrameLossRateMatchesBinarySymmetricChannel) {
  const double ber = 2e-4;
  auto rng = make_substream(5, "channel");
  const auto out = link::simulate_downlink(link::frame_file(sample_image(5), 1), passes(100, 6000), ber, rng);
  ASSERT_TRUE(out.file);
  const double p = 1.0 - std::pow(1.0 - ber, 252 * 8);
  const double n = static_cast<double>(out.session.frames_sent);
  EXPECT_NEAR(out.session.frames_lost / n, p, 5.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Link, VerifierFailureForcesFullRetransmission) {
  const auto image = sample_image(6);
  int calls = 0;
  auto verify = [&](std::span<const std::uint8_t>) { return ++calls > 1; };
  auto rng = make_substream(6, "channel");
  const auto out = link::simulate_downlink(link::frame_file(image, 1), passes(2, 1000), 0.0, rng, verify);
  ASSERT_TRUE(out.file);
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(out.session.integrity_resets, 1u);
  EXPECT_EQ(out.session.frames_sent, 548u);
}

TEST(Link, BitErrorCountsAreBinomial) {
  auto rng = make_substream(7, "channel");
  const double ber = 1e-3;
  std::vector<std::uint8_t> buf(1000);
  double total = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    std::fill(buf.begin(), buf.end(), 0);
    link::apply_bit_errors(buf, ber, rng);
    for (auto b : buf) total += std::popcount(b);
  }
  const double expected = trials * 8000 * ber;
  EXPECT_NEAR(total, expected, 5.0 * std::sqrt(expected));

  std::fill(buf.begin(), buf.end(), 0x5A);
  link::apply_bit_errors(buf, 0.0, rng);
  for (auto b : buf) EXPECT_EQ(b, 0x5A);
}

TEST(Link, RejectsBadArguments) {
  EXPECT_THROW(link::Downlink({}, 0.0), Error);
  EXPECT_THROW(link::Downlink(link::frame_file(sample_image(8), 1), 1.5), Error);
}
