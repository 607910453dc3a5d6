#include "pairsat/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pairsat/error.hpp"

namespace pairsat::payload {

namespace {

std::int16_t to_centi(double value) {
  const double v = std::round(value * 100.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

std::uint32_t to_u32(std::uint64_t v) {
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(v, std::numeric_limits<std::uint32_t>::max()));
}

// Length of [a0, a1) covered by the union of the hops.
double overlap(double a0, double a1, const std::vector<ModeHop>& hops) {
  std::vector<std::pair<double, double>> parts;
  for (const auto& h : hops) {
    const double lo = std::max(a0, h.start), hi = std::min(a1, h.start + h.duration);
    if (hi > lo) parts.emplace_back(lo, hi);
  }
  std::sort(parts.begin(), parts.end());
  double total = 0.0, reach = a0;
  for (const auto& [lo, hi] : parts) {
    if (hi > reach) total += hi - std::max(lo, reach);
    reach = std::max(reach, hi);
  }
  return total;
}

std::uint8_t saturation_flags(const optics::RateTriple& r) {
  std::uint8_t f = 0;
  if (r.saturated[0]) f |= record_flags::saturated_1;
  if (r.saturated[1]) f |= record_flags::saturated_2;
  return f;
}

class Runner {
 public:
  Runner(const ExperimentProfile& profile, std::int64_t start, const env::ThermalState& initial,
         const Environment& environment, const ControllerConfig& config)
      : profile_(profile), env_(environment), config_(config), t_(start), state_(initial) {}

  std::int64_t now() const { return t_; }
  const env::ThermalState& state() const { return state_; }

  void set_phase(Phase phase, std::vector<PhaseEvent>& log) {
    phase_ = phase;
    log.push_back({t_, "phase", std::string(to_string(phase))});
  }

  /// One second of thermal evolution with the given heater command.
  void tick(bool heater, std::vector<PhaseEvent>& log, std::vector<TraceSample>& trace) {
    if (heater != state_.heater_on) log.push_back({t_, "heater", heater ? "on" : "off"});
    state_ = env::step_thermal(state_, 1.0, heater, env_.ambient_c(t_), env_.thermal);
    ++t_;
    trace.push_back({t_, state_.t1_c, state_.t2_c, state_.ambient_c, state_.heater_on, phase_});
  }

  void heater_off(std::vector<PhaseEvent>& log) {
    if (!state_.heater_on) return;
    log.push_back({t_, "heater", "off"});
    state_.heater_on = false;
  }

  /// Heater command during the hold phases.
  bool hold_command() const {
    if (!config_.thermostat_hold || !profile_.turn_on_temp_c) return false;
    const double setpoint = *profile_.turn_on_temp_c;
    if (state_.heater_on) return state_.payload_c < setpoint;
    return state_.payload_c < setpoint - config_.thermostat_hysteresis_c;
  }

 private:
  const ExperimentProfile& profile_;
  const Environment& env_;
  const ControllerConfig& config_;
  std::int64_t t_;
  env::ThermalState state_;
  Phase phase_ = Phase::idle;
};

}  // namespace

double rotator_angle(int setting_index) {
  if (setting_index < 0 || setting_index >= static_cast<int>(kSettingsPerRun))
    throw Error("invalid_argument", "rotator setting index must be in [0, 15]");
  return 22.5 * setting_index;
}

std::array<double, kSettingsPerRun> default_rotator_table() {
  std::array<double, kSettingsPerRun> table{};
  for (std::size_t i = 0; i < table.size(); ++i) table[i] = rotator_angle(static_cast<int>(i));
  return table;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::idle: return "idle";
    case Phase::heating: return "heating";
    case Phase::dark: return "dark";
    case Phase::experiment: return "experiment";
  }
  return "idle";
}

ProfileResult execute_profile(const ExperimentProfile& profile, std::int64_t start_epoch,
                              const env::ThermalState& initial, const Environment& environment,
                              const optics::SourceModel& source, const optics::DetectorModel& det,
                              const ControllerConfig& config, const env::PowerModel& power,
                              Rng& counts_rng, Rng& modehop_rng) {
  if (!environment.ambient_c || !environment.elapsed_days)
    throw Error("environment_unavailable", "no thermal environment supplied to the payload");

  const int dark_s = profile.dark_min * 60;
  const int expt_s = profile.expt_min * 60;
  const int n_runs = expt_s / kRunSeconds;
  if (!fits_in_file(static_cast<std::size_t>(dark_s), static_cast<std::size_t>(n_runs)))
    throw Error("capacity_exceeded", "profile " + format_profile_id(profile.id) + " overflows the data file");

  ProfileResult result;
  result.start_epoch = start_epoch;
  auto& log = result.log;
  auto& trace = result.trace;
  auto& file = result.file;
  file.header.profile_id = profile.id;
  file.header.start_epoch_s = start_epoch;
  file.header.config_hash = config.config_hash;
  const double hv = det.bias_mv + (profile.hv_variant ? config.hv_variant_offset_mv : 0.0);
  file.header.bias_mv = static_cast<std::int16_t>(std::lround(hv));

  Runner runner(profile, start_epoch, initial, environment, config);

  // Phase 1: heat until the turn-on temperature or until the budget runs out.
  if (profile.turn_on_temp_c && profile.heating_budget_min > 0) {
    runner.set_phase(Phase::heating, log);
    const int budget = profile.effective_heating_s();
    int elapsed = 0;
    while (runner.state().payload_c < *profile.turn_on_temp_c && elapsed < budget) {
      runner.tick(true, log, trace);
      ++elapsed;
    }
    if (runner.state().payload_c < *profile.turn_on_temp_c) {
      file.header.flags |= header_flags::heating_timeout;
      log.push_back({runner.now(), "heating_timeout", "turn-on temperature not reached"});
    }
    file.header.heating_s = static_cast<std::uint16_t>(elapsed);
  }

  // Phase 2: darks with the pump off.
  if (dark_s > 0) {
    runner.set_phase(Phase::dark, log);
    file.dark_records.reserve(static_cast<std::size_t>(dark_s));
    for (int i = 0; i < dark_s; ++i) {
      const auto& s = runner.state();
      optics::PayloadConditions c;
      c.pump_mw = 0.0;
      c.temperature_c = s.payload_c;
      c.elapsed_days = environment.elapsed_days(runner.now());
      c.fixed_angle_deg = config.fixed_angle_deg;
      c.rotated_arm = profile.rotated_arm;
      const auto rates = optics::expected_rates(c, source, det);
      const auto counts = optics::sample_counts(rates, kIntegrationS, counts_rng);

      SettingRecord r;
      r.integration_ms = static_cast<std::uint16_t>(kIntegrationS * 1000);
      r.s1 = to_u32(counts.s1);
      r.s2 = to_u32(counts.s2);
      r.coinc = to_u32(counts.coinc);
      r.t1_centi_c = to_centi(s.t1_c);
      r.t2_centi_c = to_centi(s.t2_c);
      r.hv_mv = file.header.bias_mv;
      r.flags = static_cast<std::uint8_t>(record_flags::dark_phase | saturation_flags(rates));
      file.dark_records.push_back(r);
      runner.tick(runner.hold_command(), log, trace);
    }
  }

  // Phase 3: rotator scans.
  if (expt_s > 0) {
    runner.set_phase(Phase::experiment, log);
    const std::int64_t phase_start = runner.now();
    const double pump_mw = pump_power_mw(profile.pump, config.lasing);

    // Mode hops over the whole phase, drawn up front so the schedule does
    // not depend on how many count draws precede it.
    auto& hops = result.mode_hops;
    if (config.modehop_rate_per_s > 0.0) {
      std::exponential_distribution<double> gap(config.modehop_rate_per_s);
      std::uniform_real_distribution<double> length(config.modehop_min_s, config.modehop_max_s);
      double t = static_cast<double>(phase_start) + gap(modehop_rng);
      while (t < static_cast<double>(phase_start + expt_s)) {
        hops.push_back({t, length(modehop_rng)});
        t += gap(modehop_rng);
      }
    }

    // Thermal trajectory for the phase, one state per second.
    std::vector<env::ThermalState> states;
    states.reserve(static_cast<std::size_t>(expt_s) + 1);
    std::size_t next_hop_event = 0;
    for (int i = 0; i < expt_s; ++i) {
      states.push_back(runner.state());
      while (next_hop_event < hops.size() && hops[next_hop_event].start < static_cast<double>(runner.now() + 1)) {
        char detail[64];
        std::snprintf(detail, sizeof detail, "pump dropout %.1f s", hops[next_hop_event].duration);
        log.push_back({runner.now(), "mode_hop", detail});
        ++next_hop_event;
      }
      runner.tick(runner.hold_command(), log, trace);
    }

    file.runs.reserve(static_cast<std::size_t>(n_runs));
    for (int run_index = 0; run_index < n_runs; ++run_index) {
      const std::int64_t run_start = phase_start + static_cast<std::int64_t>(run_index) * kRunSeconds;
      RunRecord run;
      run.seq = static_cast<std::uint16_t>(run_index);
      run.epoch_offset_s = static_cast<std::uint32_t>(run_start - start_epoch);
      run.pump_centi_mw = static_cast<std::uint16_t>(std::lround(pump_mw * 100.0));
      if (overlap(static_cast<double>(run_start), static_cast<double>(run_start + kRunSeconds), hops) > 0.0)
        run.flags |= record_flags::mode_hop_dropout;

      for (std::size_t k = 0; k < kSettingsPerRun; ++k) {
        const double window_start = static_cast<double>(run_start) + static_cast<double>(k) * (kSettleS + kIntegrationS) + kSettleS;
        const double window_end = window_start + kIntegrationS;
        const double lost = overlap(window_start, window_end, hops) / kIntegrationS;
        const auto second = static_cast<std::size_t>(std::floor(window_start + 0.5 * kIntegrationS) - static_cast<double>(phase_start));
        const auto& s = states[std::min(second, states.size() - 1)];

        optics::PayloadConditions c;
        c.scan_angle_deg = config.rotator_angles_deg[k];
        c.fixed_angle_deg = config.fixed_angle_deg;
        c.pump_mw = pump_mw * (1.0 - lost);
        c.temperature_c = s.payload_c;
        c.elapsed_days = environment.elapsed_days(static_cast<std::int64_t>(std::floor(window_start)));
        c.rotated_arm = profile.rotated_arm;
        const auto rates = optics::expected_rates(c, source, det);
        const auto counts = optics::sample_counts(rates, kIntegrationS, counts_rng);

        auto& r = run.settings[k];
        r.setting_index = static_cast<std::uint8_t>(k);
        const long centideg = std::lround(config.rotator_angles_deg[k] * 100.0) % 36000;
        r.angle_centideg = static_cast<std::uint16_t>(centideg < 0 ? centideg + 36000 : centideg);
        r.integration_ms = static_cast<std::uint16_t>(kIntegrationS * 1000);
        r.s1 = to_u32(counts.s1);
        r.s2 = to_u32(counts.s2);
        r.coinc = to_u32(counts.coinc);
        r.t1_centi_c = to_centi(s.t1_c);
        r.t2_centi_c = to_centi(s.t2_c);
        r.hv_mv = file.header.bias_mv;
        r.flags = saturation_flags(rates);
        if (lost > 0.0) r.flags |= record_flags::mode_hop_dropout;
        run.flags |= static_cast<std::uint8_t>(r.flags & (record_flags::saturated_1 | record_flags::saturated_2));
      }
      if (run.flags != 0) log.push_back({run_start, "run_flagged", "run " + std::to_string(run_index)});
      file.runs.push_back(run);
    }
  }

  runner.heater_off(log);
  runner.set_phase(Phase::idle, log);
  std::stable_sort(log.begin(), log.end(),
                   [](const PhaseEvent& a, const PhaseEvent& b) { return a.epoch < b.epoch; });
  result.end_epoch = runner.now();
  result.final_thermal = runner.state();
  result.energy_wh = env::profile_energy_wh(static_cast<double>(result.end_epoch - start_epoch), power);
  return result;
}

}  // namespace pairsat::payload
