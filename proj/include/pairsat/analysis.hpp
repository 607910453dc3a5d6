#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pairsat/onboard_file.hpp"
#include "pairsat/optics.hpp"
#include "pairsat/rng.hpp"

namespace pairsat::analysis {

struct AnalysisOptions {
  /// Must match the coincidence window the counts were taken with.
  double coincidence_window_s = 1e-9;
  /// Dark rates are also quoted at this temperature using the doubling law.
  double reference_temperature_c = 18.0;
  double dark_doubling_c = 7.0;
  /// Trend flag threshold on the latest-minus-earliest dark rate, cps.
  double dark_rise_threshold_cps = 10000.0;
  bool bootstrap = false;
  int bootstrap_resamples = 200;
  std::uint64_t bootstrap_seed = 1;
};

struct DarkEstimate {
  std::size_t records = 0;
  std::array<double, 2> mean_cps{};       ///< as measured
  std::array<double, 2> reference_cps{};  ///< normalized to the reference temperature
  double mean_temperature_c = 0.0;
};

/// Mean dark-phase rates per arm; nullopt when the file has no dark records.
std::optional<DarkEstimate> estimate_darks(const payload::OnboardFile& file, const AnalysisOptions& options);

struct IntegratedScan {
  std::array<double, payload::kSettingsPerRun> angle_deg{};
  std::array<std::uint64_t, payload::kSettingsPerRun> s1{};
  std::array<std::uint64_t, payload::kSettingsPerRun> s2{};
  std::array<std::uint64_t, payload::kSettingsPerRun> coinc{};
  std::array<double, payload::kSettingsPerRun> integration_s{};
  std::size_t valid_run_count = 0;
  std::size_t total_run_count = 0;
  std::optional<DarkEstimate> darks;
};

/// Sums counts per setting over runs without dropout or saturation flags.
/// Throws pairsat::Error("no_valid_runs") if none remain.
IntegratedScan integrate_runs(const payload::OnboardFile& file, const AnalysisOptions& options = {});

struct CorrectedScan {
  std::array<double, payload::kSettingsPerRun> angle_deg{};
  std::array<double, payload::kSettingsPerRun> raw{};
  std::array<double, payload::kSettingsPerRun> accidentals{};
  std::array<double, payload::kSettingsPerRun> corrected{};
  std::array<double, payload::kSettingsPerRun> variance{};
  std::array<double, payload::kSettingsPerRun> integration_s{};
};

/// Removes accidentals estimated from the measured singles, N1*N2*tau/T,
/// and propagates Poisson variance. Corrected values may go negative.
CorrectedScan subtract_background(const IntegratedScan& scan, double coincidence_window_s);

/// Weighted fit of y = a + b cos 2θ + c sin 2θ.
struct MalusFit {
  double mean = 0.0;  ///< a
  double cos_amplitude = 0.0;  ///< b
  double sin_amplitude = 0.0;  ///< c
  double visibility = 0.0;
  double phase_deg = 0.0;  ///< ½·atan2(c, b), in (-90, 90]
  bool phase_defined = true;
  double sigma_visibility = 0.0;
  double sigma_phase_deg = 0.0;
  double chi2_per_dof = 0.0;
  std::size_t points = 0;
  std::array<std::array<double, 3>, 3> covariance{};

  double model(double angle_deg) const;
};

/// Throws pairsat::Error("singular_design") unless at least four points
/// with three distinct angles modulo 180° are given; ("invalid_argument")
/// on mismatched lengths or nonpositive variances.
MalusFit fit_malus(std::span<const double> angles_deg, std::span<const double> values,
                   std::span<const double> variances);

MalusFit fit_corrected(const CorrectedScan& scan);

/// Poisson-resampling estimate of the visibility spread for small scans.
double bootstrap_sigma_visibility(const IntegratedScan& scan, double coincidence_window_s, int resamples,
                                  Rng& rng);

struct TrendPoint {
  double elapsed_days = 0.0;
  double cps = 0.0;
};

struct TrendFit {
  double slope_cps_per_day = 0.0;
  double intercept_cps = 0.0;
  /// NaN when only two epochs are available (no residual degrees of freedom).
  double slope_stderr = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  double rise_cps = 0.0;  ///< latest epoch minus earliest epoch
  bool rise_flagged = false;
  std::size_t epochs = 0;
};

/// Ordinary least-squares slope of dark rate against days in orbit.
/// Throws pairsat::Error("insufficient_epochs") with fewer than 2 distinct epochs.
TrendFit dark_trend(std::span<const TrendPoint> series, double rise_threshold_cps);

/// Per-file science summary.
struct FileAnalysis {
  std::uint16_t file_id = 0;
  payload::FileHeader header;
  double elapsed_days = 0.0;
  optics::Arm scanned_arm = optics::Arm::signal;
  std::optional<DarkEstimate> darks;
  std::optional<IntegratedScan> scan;
  std::optional<CorrectedScan> corrected;
  std::optional<MalusFit> fit;
  double bootstrap_sigma_visibility = 0.0;
  /// Mean rates over the valid scan settings (cps).
  double mean_s1_cps = 0.0;
  double mean_s2_cps = 0.0;
  double mean_raw_coinc_cps = 0.0;
  double mean_corrected_coinc_cps = 0.0;
};

FileAnalysis analyze_file(std::uint16_t file_id, const payload::OnboardFile& file, const AnalysisOptions& options);

struct CampaignReport {
  std::vector<FileAnalysis> files;  ///< ordered by file id
  std::array<std::optional<TrendFit>, 2> dark_trends;
};

/// Throws pairsat::Error("empty_archive") when there is nothing to report.
CampaignReport build_report(std::vector<FileAnalysis> files, const AnalysisOptions& options);

}  // namespace pairsat::analysis
