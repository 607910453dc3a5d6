#include "pairsat/optics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pairsat/error.hpp"

namespace pairsat::optics {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::uint64_t draw_poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(rng);
}

}  // namespace

void SourceModel::validate() const {
  const bool ok = pump_power_ref_mw > 0.0 && pump_power_max_mw >= pump_power_ref_mw &&
                  mean_coinc_ref_cps >= 0.0 && mean_singles_spdc_ref_cps[0] >= 0.0 &&
                  mean_singles_spdc_ref_cps[1] >= 0.0 && visibility_rotator >= 0.0 &&
                  visibility_rotator <= 1.0 && pbs_extinction >= 1.0 &&
                  tilt_half_angle_urad > 0.0 && coincidence_window_s >= 0.0;
  if (!ok) throw Error("invalid_config", "source model parameters out of range");
}

void DetectorModel::validate() const {
  const bool ok = dark_ref_cps[0] >= 0.0 && dark_ref_cps[1] >= 0.0 &&
                  radiation_slope_cps_per_day >= 0.0 && dark_doubling_c > 0.0 &&
                  linear_limit_cps > 0.0 && efficiency_scale >= 0.0;
  if (!ok) throw Error("invalid_config", "detector model parameters out of range");
}

double tilt_deflection(double temperature_c, const SourceModel& source) {
  return source.tilt_coeff_urad_per_c * (temperature_c - source.align_temperature_c);
}

double brightness_factor(double deflection_urad, const SourceModel& source) {
  const double x = deflection_urad / source.tilt_half_angle_urad;
  return std::exp2(-x * x);
}

double dark_rate(int detector_index, double temperature_c, double elapsed_days,
                 const DetectorModel& det) {
  if (detector_index != 1 && detector_index != 2)
    throw Error("invalid_detector", "detector index must be 1 or 2");
  if (elapsed_days < 0.0) throw Error("invalid_argument", "elapsed days must be nonnegative");
  const double base = det.dark_ref_cps[static_cast<std::size_t>(detector_index - 1)] +
                      det.radiation_slope_cps_per_day * elapsed_days;
  return base * std::exp2((temperature_c - det.reference_temperature_c) / det.dark_doubling_c);
}

DetectorResponse apply_detector_response(double true_rate_cps, const DetectorModel& det) {
  if (true_rate_cps <= det.linear_limit_cps) return {true_rate_cps, false};
  return {det.linear_limit_cps, true};
}

RateTriple expected_rates(const PayloadConditions& c, const SourceModel& source,
                          const DetectorModel& det) {
  if (!(c.pump_mw >= 0.0)) throw Error("invalid_argument", "pump power must be nonnegative");
  const double pump = std::min(c.pump_mw, source.pump_power_max_mw);
  const double g = brightness_factor(tilt_deflection(c.temperature_c, source), source) *
                   (pump / source.pump_power_ref_mw);
  const double v = source.visibility_rotator;
  const double eff = det.efficiency_scale;

  const double pairs =
      g * eff * eff * source.mean_coinc_ref_cps *
      (1.0 + v * std::cos(2.0 * (c.scan_angle_deg - c.fixed_angle_deg) * kDegToRad));

  const std::size_t scanned = c.rotated_arm == Arm::signal ? 0 : 1;
  std::array<double, 2> spdc{};
  for (std::size_t arm = 0; arm < 2; ++arm) {
    spdc[arm] = g * eff * source.mean_singles_spdc_ref_cps[arm];
    if (arm == scanned)
      spdc[arm] *= 1.0 + v * std::cos(2.0 * (c.scan_angle_deg - source.singles_phase_deg[arm]) *
                                      kDegToRad);
  }

  const double total1 = spdc[0] + dark_rate(1, c.temperature_c, c.elapsed_days, det);
  const double total2 = spdc[1] + dark_rate(2, c.temperature_c, c.elapsed_days, det);
  const auto r1 = apply_detector_response(total1, det);
  const auto r2 = apply_detector_response(total2, det);

  RateTriple out;
  out.s1_expected = r1.reported_cps;
  out.s2_expected = r2.reported_cps;
  out.saturated = {r1.saturated, r2.saturated};
  out.accidental_expected = r1.reported_cps * r2.reported_cps * source.coincidence_window_s;
  out.coinc_expected = pairs + out.accidental_expected;
  return out;
}

ObservedCounts sample_counts(const RateTriple& rates, double integration_s, Rng& rng) {
  if (!(integration_s > 0.0)) throw Error("invalid_argument", "integration time must be positive");
  ObservedCounts out;
  out.s1 = draw_poisson(rates.s1_expected * integration_s, rng);
  out.s2 = draw_poisson(rates.s2_expected * integration_s, rng);
  out.coinc = draw_poisson(rates.coinc_expected * integration_s, rng);
  return out;
}

}  // namespace pairsat::optics
