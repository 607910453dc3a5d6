#pragma once

#include <array>
#include <cstdint>

#include "pairsat/rng.hpp"

namespace pairsat::optics {

/// Arm 1 carries the signal photon (760 nm), arm 2 the idler (867 nm).
enum class Arm { signal, idler };

/// Phenomenological pair source: observable rates at reference conditions
/// (10 mW pump, aligned crystal) rather than internal efficiencies.
struct SourceModel {
  double pump_power_ref_mw = 10.0;
  double pump_power_max_mw = 40.0;
  double mean_coinc_ref_cps = 60.0;
  std::array<double, 2> mean_singles_spdc_ref_cps{33000.0, 25000.0};
  double visibility_rotator = 0.97;
  double pbs_extinction = 200.0;
  double align_temperature_c = 18.0;
  double tilt_coeff_urad_per_c = 17.0;
  double tilt_half_angle_urad = 170.0;
  double coincidence_window_s = 1e-9;
  /// Polarization angle of the SPDC light on each arm, seen by a scanning rotator.
  std::array<double, 2> singles_phase_deg{0.0, 0.0};

  // Descriptive metadata, carried into reports.
  double signal_wavelength_nm = 760.0;
  double idler_wavelength_nm = 867.0;
  double pump_wavelength_nm = 405.0;
  double bandwidth_fwhm_nm = 17.0;
  double crystal_length_mm = 6.0;
  double phase_match_angle_deg = 28.8;

  /// Throws pairsat::Error("invalid_config") when a field is out of range.
  void validate() const;
};

struct DetectorModel {
  std::array<double, 2> dark_ref_cps{34000.0, 24000.0};
  double radiation_slope_cps_per_day = 30000.0 / 36.0;
  double dark_doubling_c = 7.0;
  /// Temperature at which dark_ref_cps was characterized (crystal alignment temperature).
  double reference_temperature_c = 18.0;
  double linear_limit_cps = 600000.0;
  double bias_mv = 0.0;
  double efficiency_scale = 1.0;

  void validate() const;
};

struct RateTriple {
  double s1_expected = 0.0;
  double s2_expected = 0.0;
  /// True pair coincidences plus accidentals.
  double coinc_expected = 0.0;
  double accidental_expected = 0.0;
  std::array<bool, 2> saturated{false, false};
};

struct ObservedCounts {
  std::uint64_t s1 = 0;
  std::uint64_t s2 = 0;
  std::uint64_t coinc = 0;

  bool operator==(const ObservedCounts&) const = default;
};

/// Everything about the payload that the rates depend on at one instant.
struct PayloadConditions {
  double scan_angle_deg = 0.0;
  double fixed_angle_deg = 0.0;
  double pump_mw = 10.0;
  double temperature_c = 18.0;
  double elapsed_days = 0.0;
  Arm rotated_arm = Arm::signal;
};

/// Crystal tilt error from thermal flexure of the mount, in µrad.
double tilt_deflection(double temperature_c, const SourceModel& source);

/// Relative pair brightness for a tilt error: 2^-(deflection/half_angle)^2.
double brightness_factor(double deflection_urad, const SourceModel& source);

/// Dark count rate of detector 1 or 2 (cps). Throws on any other index.
double dark_rate(int detector_index, double temperature_c, double elapsed_days,
                 const DetectorModel& det);

struct DetectorResponse {
  double reported_cps = 0.0;
  bool saturated = false;
};

/// Closed-loop GM-APD readout: linear up to the limit (inclusive), clamped above.
DetectorResponse apply_detector_response(double true_rate_cps, const DetectorModel& det);

/// Expected singles, coincidence and accidental rates. Pump power above the
/// source maximum is clamped; negative pump power throws.
RateTriple expected_rates(const PayloadConditions& conditions, const SourceModel& source,
                          const DetectorModel& det);

/// Independent Poisson draws for the three channels over `integration_s`.
ObservedCounts sample_counts(const RateTriple& rates, double integration_s, Rng& rng);

}  // namespace pairsat::optics
