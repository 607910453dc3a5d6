#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pairsat/profiles.hpp"

namespace pairsat::env {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kEarthMuKm3PerS2 = 398600.0;
inline constexpr double kSiderealRateRadPerS = 7.2921159e-5;

/// Circular orbit on a spherical Earth, no perturbations.
struct OrbitModel {
  double altitude_km = 550.0;
  double inclination_deg = 15.0;
  double raan_deg = 0.0;
  /// Argument of latitude at t = 0.
  double phase_deg = 0.0;
  double earth_rotation_rad_per_s = kSiderealRateRadPerS;

  double semi_major_axis_km() const { return kEarthRadiusKm + altitude_km; }
  double period_s() const;
  double argument_of_latitude_rad(double t) const;
  void validate() const;
};

struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

struct GroundStation {
  std::string name = "Singapore";
  double lat_deg = 1.29;
  double lon_deg = 103.85;
  double mask_deg = 10.0;
};

struct Pass {
  std::int64_t aos_epoch = 0;
  std::int64_t los_epoch = 0;
  double max_elevation_deg = 0.0;

  std::int64_t duration_s() const { return los_epoch - aos_epoch; }
  bool contains(std::int64_t t) const { return t >= aos_epoch && t < los_epoch; }
};

/// Inertial position, km.
std::array<double, 3> position_inertial_km(double t, const OrbitModel& orbit);

/// Subsatellite point at time t (seconds since launch).
GeoPoint propagate(double t, const OrbitModel& orbit);

double elevation_deg(double t, const OrbitModel& orbit, const GroundStation& station);

/// Earth central angle from the subsatellite point to the edge of the
/// station's visibility cone at the given mask elevation.
double coverage_half_angle_deg(const OrbitModel& orbit, double mask_deg);

/// False when the ground track can never rise above the station's mask.
bool station_in_coverage(const OrbitModel& orbit, const GroundStation& station);

/// Incremental 1 s elevation scan. Emits each pass once it has ended.
class PassScanner {
 public:
  PassScanner(OrbitModel orbit, GroundStation station, std::int64_t start_epoch);

  /// Scans through [cursor, until) and returns passes whose LOS falls in it.
  std::vector<Pass> scan_until(std::int64_t until);
  std::int64_t cursor() const { return cursor_; }

 private:
  double refine_max(std::int64_t around) const;

  OrbitModel orbit_;
  GroundStation station_;
  std::int64_t cursor_;
  std::optional<std::int64_t> open_aos_;
  std::int64_t best_t_ = 0;
  double best_el_ = -90.0;
};

/// Next `count` complete passes starting at or after `from`. Returns an empty
/// list when the station is outside the orbit's coverage band.
std::vector<Pass> next_passes(std::int64_t from, std::size_t count, const GroundStation& station,
                              const OrbitModel& orbit, std::int64_t search_horizon_s = 30 * 86400);

// --- thermal ----------------------------------------------------------------

/// Spacecraft interior temperature, a sinusoid locked to the orbit period.
struct AmbientCycle {
  double mid_c = 12.0;
  double amplitude_c = 14.0;
  double phase_rad = 0.0;
  /// Zero means "use the orbit period".
  double period_s = 0.0;
};

double ambient_temperature(double t, const AmbientCycle& cycle, const OrbitModel& orbit);

struct ThermalParams {
  double relaxation_s = 900.0;
  double heater_rate_c_per_min = 1.5;
  /// T2 sits next to the heater and reads high by this much at full duty.
  double t2_heater_offset_c = 3.0;
  double heater_smoothing_s = 60.0;
};

struct ThermalState {
  double ambient_c = 12.0;
  double payload_c = 12.0;
  bool heater_on = false;
  double t1_c = 12.0;
  double t2_c = 12.0;
  /// Smoothed heater duty in [0, 1]; drives the T2 offset.
  double heater_level = 0.0;

  static ThermalState at_equilibrium(double temperature_c);
};

/// Advances the payload temperature by dt seconds with the ambient held at
/// `ambient_c`. Integrated exactly for constant inputs over the step.
ThermalState step_thermal(const ThermalState& state, double dt, bool heater_on, double ambient_c,
                          const ThermalParams& params);

// --- power ------------------------------------------------------------------

struct PowerModel {
  double peak_w = 2.5;
  double peak_minutes = 10.0;
  double sustained_w = 1.3;
  double battery_budget_wh = 2.0;
};

/// Payload energy for a profile that ran for `elapsed_s` seconds.
double profile_energy_wh(double elapsed_s, const PowerModel& power);

/// Energy of the longest execution the profile can take.
double worst_case_energy_wh(const payload::ExperimentProfile& profile, const PowerModel& power);

bool power_available(const payload::ExperimentProfile& profile, const PowerModel& power,
                     bool payload_busy);

}  // namespace pairsat::env
