#include <gtest/gtest.h>

#include "helpers.hpp"
#include "pairsat/error.hpp"

using namespace pairsat;
using namespace pairsat::payload;

TEST(Controller, RotatorGrid) {
  for (int i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(rotator_angle(i), 22.5 * i);
  EXPECT_THROW(rotator_angle(16), Error);
  EXPECT_THROW(rotator_angle(-1), Error);
}

TEST(Controller, ScienceProfileTiming) {
  const auto r = testutil::run_profile(0x10, 15.0);
  ASSERT_EQ(r.file.runs.size(), 45u);
  EXPECT_EQ(r.file.dark_records.size(), 180u);
  EXPECT_LE(r.end_epoch - r.start_epoch, 1800);
  const std::int64_t expt_start = r.file.header.heating_s + 180;
  for (std::size_t i = 0; i < r.file.runs.size(); ++i) {
    EXPECT_EQ(r.file.runs[i].seq, i);
    EXPECT_EQ(r.file.runs[i].epoch_offset_s, expt_start + 24 * static_cast<std::int64_t>(i));
    for (std::size_t k = 0; k < 16; ++k) {
      EXPECT_EQ(r.file.runs[i].settings[k].setting_index, k);
      EXPECT_EQ(r.file.runs[i].settings[k].angle_centideg, 2250 * k);
      EXPECT_EQ(r.file.runs[i].settings[k].integration_ms, 1000);
    }
    EXPECT_EQ(r.file.runs[i].pump_centi_mw, 1000);
  }
  EXPECT_EQ(r.trace.size(), static_cast<std::size_t>(r.end_epoch - r.start_epoch));
  for (const auto& d : r.file.dark_records) EXPECT_TRUE(d.flags & record_flags::dark_phase);
}

TEST(Controller, EveryProfileWithinThirtyMinutes) {
  for (const auto& [id, p] : default_profiles()) {
    const auto r = testutil::run_profile(id, -2.0);
    EXPECT_LE(r.end_epoch - r.start_epoch, 1800) << format_profile_id(id);
    EXPECT_EQ(r.file.runs.size(), static_cast<std::size_t>(p.expt_min * 60 / 24)) << format_profile_id(id);
    EXPECT_EQ(r.file.dark_records.size(), static_cast<std::size_t>(p.dark_min * 60));
    EXPECT_NO_THROW(decode_file(encode_file(r.file)));
  }
}

TEST(Controller, FullLengthProfileEnergy) {
  const auto r = testutil::run_profile(0x10, -2.0);
  EXPECT_EQ(r.end_epoch - r.start_epoch, 1800);
  EXPECT_NEAR(r.energy_wh, 0.85, 1e-12);
}

TEST(Controller, HeatingTimeoutFlag) {
  const auto cold = testutil::run_profile(0x10, -2.0);
  EXPECT_TRUE(cold.file.header.flags & header_flags::heating_timeout);
  EXPECT_EQ(cold.file.header.heating_s, 540);
  const auto warm = testutil::run_profile(0x10, 15.0);
  EXPECT_FALSE(warm.file.header.flags & header_flags::heating_timeout);
  EXPECT_GT(warm.file.header.heating_s, 0);
  EXPECT_LT(warm.file.header.heating_s, 540);
  const auto hot = testutil::run_profile(0x10, 25.0);
  EXPECT_EQ(hot.file.header.heating_s, 0);
}

TEST(Controller, ThermostatHoldsTurnOnTemperature) {
  const auto r = testutil::run_profile(0x10, 10.0);
  for (const auto& s : r.trace)
    if (s.phase == Phase::experiment) EXPECT_NEAR(s.t1_c, 18.7, 0.5);
}

TEST(Controller, DarkOnlyProfile) {
  const auto r = testutil::run_profile(0x37, 18.0, 36.0);
  EXPECT_TRUE(r.file.runs.empty());
  ASSERT_EQ(r.file.dark_records.size(), 1380u);
  double s1 = 0;
  for (const auto& d : r.file.dark_records) s1 += d.s1;
  // Pump off: only dark counts, 34,000 + 30,000 at 18 C on day 36.
  EXPECT_NEAR(s1 / 1380.0, 64000.0, 64000.0 * 0.01);
}

TEST(Controller, EmptyProfile) {
  const auto r = testutil::run_profile(0x39, 12.0);
  EXPECT_EQ(r.end_epoch, r.start_epoch);
  EXPECT_TRUE(r.file.runs.empty());
  EXPECT_TRUE(r.file.dark_records.empty());
  EXPECT_DOUBLE_EQ(r.energy_wh, 0.0);
}

TEST(Controller, HighVoltageVariant) {
  const auto r = testutil::run_profile(0x33, 15.0);
  EXPECT_EQ(r.file.header.bias_mv, 50);
  EXPECT_EQ(r.file.runs[0].settings[0].hv_mv, 50);
}

TEST(Controller, ModeHopsFlagRuns) {
  ControllerConfig cfg;
  cfg.modehop_rate_per_s = 1.0 / 60.0;
  const auto r = testutil::run_profile(0x10, 15.0, 0.0, 3, cfg);
  ASSERT_FALSE(r.mode_hops.empty());
  std::size_t flagged = 0;
  for (const auto& run : r.file.runs) {
    const double a = static_cast<double>(run.epoch_offset_s), b = a + 24.0;
    bool hit = false;
    for (const auto& h : r.mode_hops) hit |= h.start < b && h.start + h.duration > a;
    EXPECT_EQ(hit, (run.flags & record_flags::mode_hop_dropout) != 0);
    flagged += hit;
  }
  EXPECT_GT(flagged, 0u);
  std::size_t logged = 0;
  for (const auto& e : r.log) logged += e.kind == "mode_hop";
  EXPECT_EQ(logged, r.mode_hops.size());
}

TEST(Controller, Deterministic) {
  const auto a = testutil::run_profile(0x10, 15.0, 3.0, 42);
  const auto b = testutil::run_profile(0x10, 15.0, 3.0, 42);
  const auto c = testutil::run_profile(0x10, 15.0, 3.0, 43);
  EXPECT_EQ(encode_file(a.file), encode_file(b.file));
  EXPECT_NE(encode_file(a.file), encode_file(c.file));
}

TEST(Controller, EventLogOrdered) {
  const auto r = testutil::run_profile(0x10, 5.0);
  for (std::size_t i = 1; i < r.log.size(); ++i) EXPECT_LE(r.log[i - 1].epoch, r.log[i].epoch);
  ASSERT_FALSE(r.log.empty());
  EXPECT_EQ(r.log.back().detail, "idle");
}

TEST(Controller, NeedsEnvironment) {
  auto counts = make_substream(1, "counts");
  auto hops = make_substream(1, "modehop");
  EXPECT_THROW(execute_profile(default_profiles().at(0x10), 0, {}, Environment{}, {}, {}, {}, {}, counts, hops),
               Error);
}
