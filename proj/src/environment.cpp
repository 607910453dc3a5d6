#include "pairsat/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pairsat/error.hpp"

namespace pairsat::env {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

std::array<double, 3> station_position_km(const GroundStation& s) {
  const double lat = s.lat_deg * kDeg;
  const double lon = s.lon_deg * kDeg;
  return {kEarthRadiusKm * std::cos(lat) * std::cos(lon), kEarthRadiusKm * std::cos(lat) * std::sin(lon),
          kEarthRadiusKm * std::sin(lat)};
}

/// Earth-fixed position: the inertial frame rotated back by Earth's spin.
std::array<double, 3> position_fixed_km(double t, const OrbitModel& orbit) {
  const auto r = position_inertial_km(t, orbit);
  const double theta = orbit.earth_rotation_rad_per_s * t;
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * r[0] + s * r[1], -s * r[0] + c * r[1], r[2]};
}

}  // namespace

double OrbitModel::period_s() const {
  const double a = semi_major_axis_km();
  return 2.0 * kPi * std::sqrt(a * a * a / kEarthMuKm3PerS2);
}

double OrbitModel::argument_of_latitude_rad(double t) const {
  return phase_deg * kDeg + 2.0 * kPi * t / period_s();
}

void OrbitModel::validate() const {
  if (!(altitude_km > 0.0)) throw Error("invalid_config", "orbit altitude must be positive");
  if (inclination_deg < 0.0 || inclination_deg > 180.0)
    throw Error("invalid_config", "orbit inclination must be within [0, 180] degrees");
}

std::array<double, 3> position_inertial_km(double t, const OrbitModel& orbit) {
  const double a = orbit.semi_major_axis_km();
  const double u = orbit.argument_of_latitude_rad(t);
  const double raan = orbit.raan_deg * kDeg;
  const double inc = orbit.inclination_deg * kDeg;
  const double cu = std::cos(u), su = std::sin(u);
  const double co = std::cos(raan), so = std::sin(raan);
  const double ci = std::cos(inc), si = std::sin(inc);
  return {a * (co * cu - so * su * ci), a * (so * cu + co * su * ci), a * su * si};
}

GeoPoint propagate(double t, const OrbitModel& orbit) {
  const double u = orbit.argument_of_latitude_rad(t);
  const double inc = orbit.inclination_deg * kDeg;
  const double lat = std::asin(std::clamp(std::sin(inc) * std::sin(u), -1.0, 1.0));
  // Right ascension relative to the node, then subtract Earth rotation.
  const double ra = orbit.raan_deg * kDeg + std::atan2(std::cos(inc) * std::sin(u), std::cos(u));
  double lon = ra - orbit.earth_rotation_rad_per_s * t;
  lon = std::remainder(lon, 2.0 * kPi);
  return {lat / kDeg, lon / kDeg};
}

double elevation_deg(double t, const OrbitModel& orbit, const GroundStation& station) {
  const auto sat = position_fixed_km(t, orbit);
  const auto gs = station_position_km(station);
  const std::array<double, 3> rho{sat[0] - gs[0], sat[1] - gs[1], sat[2] - gs[2]};
  const double range = std::sqrt(rho[0] * rho[0] + rho[1] * rho[1] + rho[2] * rho[2]);
  const double up = (rho[0] * gs[0] + rho[1] * gs[1] + rho[2] * gs[2]) / kEarthRadiusKm;
  return std::asin(std::clamp(up / range, -1.0, 1.0)) / kDeg;
}

double coverage_half_angle_deg(const OrbitModel& orbit, double mask_deg) {
  const double ratio = kEarthRadiusKm / orbit.semi_major_axis_km();
  const double mask = mask_deg * kDeg;
  return (std::acos(ratio * std::cos(mask)) - mask) / kDeg;
}

bool station_in_coverage(const OrbitModel& orbit, const GroundStation& station) {
  const double reach = coverage_half_angle_deg(orbit, station.mask_deg);
  const double max_lat = std::min(orbit.inclination_deg, 180.0 - orbit.inclination_deg);
  return std::abs(station.lat_deg) <= max_lat + reach;
}

PassScanner::PassScanner(OrbitModel orbit, GroundStation station, std::int64_t start_epoch)
    : orbit_(orbit), station_(std::move(station)), cursor_(start_epoch) {}

double PassScanner::refine_max(std::int64_t around) const {
  // Golden-section search on continuous time around the best sampled second.
  constexpr double kInvPhi = 0.6180339887498949;
  double lo = static_cast<double>(around) - 1.0, hi = static_cast<double>(around) + 1.0;
  double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
  double f1 = elevation_deg(x1, orbit_, station_), f2 = elevation_deg(x2, orbit_, station_);
  for (int i = 0; i < 60; ++i) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = elevation_deg(x2, orbit_, station_);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = elevation_deg(x1, orbit_, station_);
    }
  }
  return std::max({f1, f2, elevation_deg(static_cast<double>(around), orbit_, station_)});
}

std::vector<Pass> PassScanner::scan_until(std::int64_t until) {
  std::vector<Pass> out;
  for (; cursor_ < until; ++cursor_) {
    const double el = elevation_deg(static_cast<double>(cursor_), orbit_, station_);
    const bool above = el >= station_.mask_deg;
    if (above) {
      if (!open_aos_) {
        open_aos_ = cursor_;
        best_el_ = el;
        best_t_ = cursor_;
      } else if (el > best_el_) {
        best_el_ = el;
        best_t_ = cursor_;
      }
    } else if (open_aos_) {
      out.push_back({*open_aos_, cursor_, refine_max(best_t_)});
      open_aos_.reset();
    }
  }
  return out;
}

std::vector<Pass> next_passes(std::int64_t from, std::size_t count, const GroundStation& station,
                              const OrbitModel& orbit, std::int64_t search_horizon_s) {
  std::vector<Pass> out;
  if (count == 0 || !station_in_coverage(orbit, station)) return out;
  PassScanner scanner(orbit, station, from);
  constexpr std::int64_t kChunk = 3600;
  while (out.size() < count && scanner.cursor() < from + search_horizon_s) {
    for (const auto& p : scanner.scan_until(scanner.cursor() + kChunk)) {
      out.push_back(p);
      if (out.size() == count) break;
    }
  }
  return out;
}

double ambient_temperature(double t, const AmbientCycle& cycle, const OrbitModel& orbit) {
  const double period = cycle.period_s > 0.0 ? cycle.period_s : orbit.period_s();
  return cycle.mid_c + cycle.amplitude_c * std::sin(2.0 * kPi * t / period + cycle.phase_rad);
}

ThermalState ThermalState::at_equilibrium(double temperature_c) {
  ThermalState s;
  s.ambient_c = s.payload_c = s.t1_c = s.t2_c = temperature_c;
  return s;
}

ThermalState step_thermal(const ThermalState& state, double dt, bool heater_on, double ambient_c,
                          const ThermalParams& params) {
  if (!(dt > 0.0)) throw Error("invalid_argument", "thermal step must be positive");
  ThermalState next = state;
  const double drive = heater_on ? params.heater_rate_c_per_min / 60.0 : 0.0;
  const double equilibrium = ambient_c + params.relaxation_s * drive;
  next.payload_c = equilibrium + (state.payload_c - equilibrium) * std::exp(-dt / params.relaxation_s);

  const double target = heater_on ? 1.0 : 0.0;
  next.heater_level = target + (state.heater_level - target) * std::exp(-dt / params.heater_smoothing_s);
  next.heater_on = heater_on;
  next.ambient_c = ambient_c;
  next.t1_c = next.payload_c;
  next.t2_c = next.payload_c + params.t2_heater_offset_c * next.heater_level;
  return next;
}

double profile_energy_wh(double elapsed_s, const PowerModel& power) {
  const double elapsed_min = std::max(0.0, elapsed_s) / 60.0;
  const double peak_min = std::min(elapsed_min, power.peak_minutes);
  return (power.peak_w * peak_min + power.sustained_w * (elapsed_min - peak_min)) / 60.0;
}

double worst_case_energy_wh(const payload::ExperimentProfile& profile, const PowerModel& power) {
  const double seconds = profile.effective_heating_s() + 60.0 * (profile.dark_min + profile.expt_min);
  return profile_energy_wh(seconds, power);
}

bool power_available(const payload::ExperimentProfile& profile, const PowerModel& power,
                     bool payload_busy) {
  if (payload_busy) return false;
  return worst_case_energy_wh(profile, power) <= power.battery_budget_wh;
}

}  // namespace pairsat::env
