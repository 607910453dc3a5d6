// Prints one PASS/FAIL line per mission-level acceptance criterion and
// exits nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "helpers.hpp"
#include "pairsat/archive.hpp"
#include "pairsat/crc.hpp"
#include "pairsat/error.hpp"
#include "pairsat/mission.hpp"
#include "pairsat/onboard_file.hpp"
#include "pairsat/telemetry.hpp"

using namespace pairsat;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %-22s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

const mission::ArchivedFile* find_profile(const mission::Mission& m, std::uint8_t id) {
  for (const auto& [fid, a] : m.archive())
    if (a.file.header.profile_id == id) return &a;
  return nullptr;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return out;
}

payload::OnboardFile random_file(std::mt19937_64& rng) {
  auto rec = [&] {
    payload::SettingRecord r;
    r.setting_index = static_cast<std::uint8_t>(rng());
    r.angle_centideg = static_cast<std::uint16_t>(rng());
    r.integration_ms = static_cast<std::uint16_t>(rng());
    r.s1 = static_cast<std::uint32_t>(rng());
    r.s2 = static_cast<std::uint32_t>(rng());
    r.coinc = static_cast<std::uint32_t>(rng());
    r.t1_centi_c = static_cast<std::int16_t>(rng());
    r.t2_centi_c = static_cast<std::int16_t>(rng());
    r.hv_mv = static_cast<std::int16_t>(rng());
    r.flags = static_cast<std::uint8_t>(rng());
    return r;
  };
  payload::OnboardFile f;
  f.header.profile_id = static_cast<std::uint8_t>(rng());
  f.header.start_epoch_s = static_cast<std::int64_t>(rng());
  f.header.bias_mv = static_cast<std::int16_t>(rng());
  f.header.config_hash = static_cast<std::uint32_t>(rng());
  f.header.flags = static_cast<std::uint8_t>(rng());
  f.header.heating_s = static_cast<std::uint16_t>(rng());
  const std::size_t runs = rng() % 60;
  std::size_t darks = rng() % 1400;
  while (!payload::fits_in_file(darks, runs)) darks /= 2;
  for (std::size_t i = 0; i < darks; ++i) f.dark_records.push_back(rec());
  for (std::size_t i = 0; i < runs; ++i) {
    payload::RunRecord r;
    r.seq = static_cast<std::uint16_t>(rng());
    r.epoch_offset_s = static_cast<std::uint32_t>(rng());
    r.pump_centi_mw = static_cast<std::uint16_t>(rng());
    r.flags = static_cast<std::uint8_t>(rng());
    for (auto& s : r.settings) s = rec();
    f.runs.push_back(r);
  }
  return f;
}

bool rejected(auto&& decode) {
  try {
    decode();
  } catch (const Error&) {
    return true;
  }
  return false;
}

bool file_ok(std::span<const std::uint8_t> image) {
  return !rejected([&] { payload::decode_file(image); });
}

}  // namespace

int main() {
  const MissionConfig config;
  const auto schedule = testutil::acceptance_schedule();

  // 40-day campaign: dark baseline on day 0, science profile time-tagged at day 36.
  const auto t0 = std::chrono::steady_clock::now();
  const auto campaign = mission::run_campaign(config, 40.0, schedule);
  const double wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto* dark0 = find_profile(*campaign, 0x37);
  const auto* science = find_profile(*campaign, 0x10);

  {
    bool ok = science && science->analysis.fit;
    std::string detail = "no analyzed 0x10 file";
    if (ok) {
      const auto& f = *science->analysis.fit;
      ok = f.visibility >= 0.95 && f.visibility <= 0.99 && f.sigma_visibility <= 0.02 && wall_s <= 60.0;
      detail = fmt("V = %.4f +/- %.4f, campaign wall time %.2f s", f.visibility, f.sigma_visibility, wall_s);
    }
    report("contrast", ok, detail);
  }

  {
    bool ok = science && science->analysis.scan;
    std::string detail = "no analyzed 0x10 file";
    if (ok) {
      const auto& a = science->analysis;
      ok = within(a.mean_s1_cps, 97000, 0.15 * 97000) && within(a.mean_s2_cps, 79000, 0.15 * 79000) &&
           within(a.mean_raw_coinc_cps, 60, 0.20 * 60);
      detail = fmt("s1 %.0f cps, s2 %.0f cps, raw coincidences %.2f cps", a.mean_s1_cps, a.mean_s2_cps,
                   a.mean_raw_coinc_cps);
    }
    report("rates", ok, detail);
  }

  {
    bool ok = dark0 && science && dark0->analysis.darks && science->analysis.darks;
    std::string detail = "missing dark measurements";
    if (ok) {
      const auto& d0 = *dark0->analysis.darks;
      const auto& d36 = *science->analysis.darks;
      const double r1 = d36.reference_cps[0] - d0.reference_cps[0];
      const double r2 = d36.reference_cps[1] - d0.reference_cps[1];
      ok = within(r1, 30000, 1500) && within(r2, 30000, 1500);
      detail = fmt("rise at 18 C: arm 1 %.0f cps, arm 2 %.0f cps (days %.2f -> %.2f)", r1, r2,
                   dark0->analysis.elapsed_days, science->analysis.elapsed_days);
    }
    report("dark_rise", ok, detail);
  }

  {
    // Ground baseline: lab held 10 C above the alignment temperature, day 0.
    const auto ground = testutil::run_profile(0x10, config.source.align_temperature_c + 10.0, 0.0, config.seed);
    const auto ga = analysis::analyze_file(1, ground.file, config.analysis);
    const double half = optics::brightness_factor(
        optics::tilt_deflection(config.source.align_temperature_c + 10.0, config.source), config.source);
    bool ok = science && science->analysis.scan && ga.scan;
    std::string detail = "missing scans";
    if (ok) {
      const double ratio = ga.mean_corrected_coinc_cps / science->analysis.mean_corrected_coinc_cps;
      ok = within(ratio, 0.5, 0.05) && within(half, 0.5, 1e-12);
      detail = fmt("ground/orbit corrected coincidences %.3f (%.2f / %.2f cps), brightness at +10 C %.15f", ratio,
                   ga.mean_corrected_coinc_cps, science->analysis.mean_corrected_coinc_cps, half);
    }
    report("baseline_factor_two", ok, detail);
  }

  {
    bool ok = true;
    int worst_s = 0;
    std::size_t runs_0x10 = 0;
    for (const auto& [id, p] : payload::default_profiles()) {
      const auto r = testutil::run_profile(id, -2.0, 0.0, config.seed);
      worst_s = std::max(worst_s, static_cast<int>(r.end_epoch - r.start_epoch));
      ok &= r.end_epoch - r.start_epoch <= 1800;
      for (std::size_t i = 1; i < r.file.runs.size(); ++i)
        ok &= r.file.runs[i].epoch_offset_s - r.file.runs[i - 1].epoch_offset_s == 24;
      if (!r.file.runs.empty()) {
        const std::int64_t last_end = r.file.runs.back().epoch_offset_s + 24;
        ok &= last_end <= r.end_epoch - r.start_epoch;
      }
      if (id == 0x10) runs_0x10 = r.file.runs.size();
    }
    ok &= runs_0x10 == 45 && payload::kRunSeconds == 16 * 1.5;
    if (science) ok &= science->file.runs.size() == 45;
    report("timing", ok,
           fmt("run length %d s, 0x10 runs %zu, longest profile %d s", payload::kRunSeconds, runs_0x10, worst_s));
  }

  {
    const double e = env::profile_energy_wh(1800.0, config.power);
    double campaign_e = -1;
    for (const auto& ev : campaign->events())
      if (ev.type == "profile_complete" && ev.data["profile_id"] == "0x10") campaign_e = ev.data["energy_wh"];
    const bool ok = std::abs(e - 0.85) <= 1e-12 && std::abs(campaign_e - 0.85) <= 1e-12;
    report("energy", ok, fmt("model %.15f Wh, campaign 0x10 %.15f Wh", e, campaign_e));
  }

  {
    const auto image = science ? science->image : payload::encode_file(payload::OnboardFile{});
    const auto frames = link::frame_file(image, 1);
    const auto passes = env::next_passes(0, 400, config.station, config.orbit);
    std::vector<env::Pass> long_passes;
    for (const auto& p : passes)
      if (p.duration_s() >= 470) long_passes.push_back(p);
    auto rng = make_substream(config.seed, "channel");
    const auto clean = link::simulate_downlink(frames, long_passes, 0.0, rng, file_ok);
    bool ok = clean.file && *clean.file == image && clean.session.frames_sent == 274 &&
              within(clean.session.on_air_s(), 460.3, 0.1);
    int identical = 0;
    std::uint64_t sent = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      auto r = make_substream(config.seed + trial, "channel");
      const auto noisy = link::simulate_downlink(frames, passes, 1e-3, r, file_ok);
      identical += noisy.file && *noisy.file == image;
      sent += noisy.session.frames_sent;
    }
    ok &= identical == 100;
    report("link", ok,
           fmt("ber 0: %llu frames, %.2f s on air; ber 1e-3: %d/100 identical, mean %.0f frames",
               static_cast<unsigned long long>(clean.session.frames_sent), clean.session.on_air_s(), identical,
               sent / 100.0));
  }

  {
    std::mt19937_64 rng(config.seed);
    int round_trips = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto f = random_file(rng);
      const auto image = payload::encode_file(f);
      bool ok = payload::decode_file(image) == f;
      link::TelemetryFrame fr;
      fr.file_id = static_cast<std::uint16_t>(rng());
      fr.seq = static_cast<std::uint16_t>(rng());
      fr.payload_len = static_cast<std::uint8_t>(rng() % 241);
      for (std::size_t k = 0; k < fr.payload_len; ++k) fr.payload[k] = static_cast<std::uint8_t>(rng());
      ok &= link::decode_frame(link::encode_frame(fr)) == fr;
      round_trips += ok;
    }
    const std::string check = "123456789";
    const auto crc = crc16_ccitt_false(std::span(reinterpret_cast<const std::uint8_t*>(check.data()), check.size()));

    std::size_t undetected = 0, trials = 0;
    const auto image = payload::encode_file(random_file(rng));
    for (std::size_t pos = 0; pos < image.size(); ++pos) {
      auto bad = image;
      bad[pos] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      ++trials;
      undetected += file_ok(bad);
    }
    link::TelemetryFrame fr;
    fr.payload_len = 240;
    for (auto& b : fr.payload) b = static_cast<std::uint8_t>(rng());
    const auto raw = link::encode_frame(fr);
    for (std::size_t pos = 0; pos < raw.size(); ++pos)
      for (int v = 1; v < 256; ++v) {
        auto bad = raw;
        bad[pos] ^= static_cast<std::uint8_t>(v);
        ++trials;
        undetected += !rejected([&] { link::decode_frame(bad); });
      }
    report("codec", round_trips == 1000 && crc == 0x29B1 && undetected == 0,
           fmt("%d/1000 round trips, CRC-16 check 0x%04X, %zu/%zu single-byte corruptions undetected", round_trips,
               crc, undetected, trials));
  }

  {
    constexpr double kDeg = std::numbers::pi / 180.0;
    double worst_inv = 0, worst_scale = 0, worst_shift = 0;
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> uv(0.05, 1.0), uth(-89.0, 89.0), ua(10.0, 5000.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
      const double a = ua(rng), v = uv(rng), th0 = uth(rng);
      std::vector<double> ang, y, var, yn;
      for (int i = 0; i < 16; ++i) {
        ang.push_back(22.5 * i);
        y.push_back(a * (1 + v * std::cos(2 * (22.5 * i - th0) * kDeg)));
        yn.push_back(y.back() + std::sqrt(y.back()) * noise(rng));
        var.push_back(std::max(1.0, y.back()));
      }
      const auto f = analysis::fit_malus(ang, y, var);
      double dth = std::fmod(f.phase_deg - th0 + 270.0, 180.0) - 90.0;
      worst_inv = std::max({worst_inv, std::abs(f.visibility - v), std::abs(dth)});

      const auto base = analysis::fit_malus(ang, yn, var);
      const double k = 7.25;
      std::vector<double> ys, vs, as;
      for (int i = 0; i < 16; ++i) {
        ys.push_back(k * yn[i]);
        vs.push_back(k * k * var[i]);
        as.push_back(ang[i] + 13.0);
      }
      const auto fs_ = analysis::fit_malus(ang, ys, vs);
      const auto fsh = analysis::fit_malus(as, yn, var);
      worst_scale = std::max({worst_scale, std::abs(fs_.visibility - base.visibility),
                              std::abs(fs_.phase_deg - base.phase_deg)});
      double shift = std::fmod(fsh.phase_deg - base.phase_deg - 13.0 + 270.0, 180.0) - 90.0;
      worst_shift = std::max({worst_shift, std::abs(fsh.visibility - base.visibility), std::abs(shift)});
    }
    report("estimator", worst_inv <= 1e-9 && worst_scale <= 1e-12 && worst_shift <= 1e-12,
           fmt("inversion error %.2e, scale %.2e, shift %.2e", worst_inv, worst_scale, worst_shift));
  }

  {
    const auto d1 = testutil::temp_dir("accept1"), d2 = testutil::temp_dir("accept2");
    fs::remove_all(d1);
    fs::remove_all(d2);
    archive::write_archive(*campaign, d1);
    archive::write_archive(*mission::run_campaign(config, 40.0, schedule), d2);
    const auto a = read_tree(d1), b = read_tree(d2);
    std::size_t bytes = 0;
    for (const auto& [k, v] : a) bytes += v.size();
    report("determinism", a == b && !a.empty(), fmt("%zu archive files, %zu bytes compared", a.size(), bytes));
    fs::remove_all(d1);
    fs::remove_all(d2);
  }

  {
    double lo = 1e9, hi = -1e9;
    const double period = config.orbit.period_s();
    for (int i = 0; i < 200000; ++i) {
      const double v = env::ambient_temperature(period * i / 200000.0, config.ambient, config.orbit);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    auto s = env::ThermalState::at_equilibrium(10.0);
    int seconds = 0;
    while (s.t1_c < 18.0 && seconds < 3600) {
      s = env::step_thermal(s, 1.0, true, 10.0, config.thermal);
      ++seconds;
    }
    report("thermal", within(lo, -2.0, 1e-6) && within(hi, 26.0, 1e-6) && seconds <= 600,
           fmt("ambient %.4f / %.4f C, 10 -> 18 C in %d s", lo, hi, seconds));
  }

  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
