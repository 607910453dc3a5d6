#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pairsat/environment.hpp"
#include "pairsat/onboard_file.hpp"
#include "pairsat/optics.hpp"
#include "pairsat/profiles.hpp"
#include "pairsat/rng.hpp"

namespace pairsat::payload {

inline constexpr double kIntegrationS = 1.0;
inline constexpr double kSettleS = 0.5;
inline constexpr int kRunSeconds = 24;  // 16 x (0.5 s settle + 1.0 s integrate)

/// Default rotator grid: 22.5 degrees per setting, two full Malus periods.
double rotator_angle(int setting_index);

std::array<double, kSettingsPerRun> default_rotator_table();

struct ControllerConfig {
  /// Identity-calibrated voltage-setting to rotation-angle lookup.
  std::array<double, kSettingsPerRun> rotator_angles_deg = default_rotator_table();
  /// Angle of the rotator that is held still.
  double fixed_angle_deg = 0.0;
  LasingCurve lasing;
  double modehop_rate_per_s = 1.0 / 600.0;
  double modehop_min_s = 2.0;
  double modehop_max_s = 10.0;
  /// Keep the heater regulating at the turn-on temperature through the dark
  /// and experiment phases.
  bool thermostat_hold = true;
  double thermostat_hysteresis_c = 0.3;
  double hv_variant_offset_mv = 50.0;
  std::uint32_t config_hash = 0;
};

/// What the payload sees of the spacecraft while a profile runs.
struct Environment {
  std::function<double(std::int64_t)> ambient_c;
  std::function<double(std::int64_t)> elapsed_days;
  env::ThermalParams thermal;
};

enum class Phase { idle, heating, dark, experiment };
std::string_view to_string(Phase phase);

struct PhaseEvent {
  std::int64_t epoch = 0;
  std::string kind;    ///< phase, heater, heating_timeout, mode_hop, run_flagged
  std::string detail;
};

struct TraceSample {
  std::int64_t epoch = 0;
  double t1_c = 0.0;
  double t2_c = 0.0;
  double ambient_c = 0.0;
  bool heater_on = false;
  Phase phase = Phase::idle;
};

struct ModeHop {
  double start = 0.0;  ///< absolute epoch, s
  double duration = 0.0;
};

struct ProfileResult {
  OnboardFile file;
  std::vector<PhaseEvent> log;
  std::vector<TraceSample> trace;  ///< one sample per elapsed second
  std::vector<ModeHop> mode_hops;
  double energy_wh = 0.0;
  std::int64_t start_epoch = 0;
  std::int64_t end_epoch = 0;
  env::ThermalState final_thermal;
};

/// Runs one profile: heating until the turn-on temperature (or budget
/// expiry), a pump-off dark phase of 1 s samples, then back-to-back 24 s
/// rotator scans until the experiment time is used up.
ProfileResult execute_profile(const ExperimentProfile& profile, std::int64_t start_epoch,
                              const env::ThermalState& initial, const Environment& environment,
                              const optics::SourceModel& source, const optics::DetectorModel& det,
                              const ControllerConfig& config, const env::PowerModel& power,
                              Rng& counts_rng, Rng& modehop_rng);

}  // namespace pairsat::payload
