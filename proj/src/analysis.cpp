#include "pairsat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "pairsat/error.hpp"
#include "pairsat/profiles.hpp"

namespace pairsat::analysis {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::uint8_t kExcludeRun = payload::record_flags::mode_hop_dropout |
                                     payload::record_flags::saturated_1 |
                                     payload::record_flags::saturated_2;

using Mat3 = std::array<std::array<double, 3>, 3>;

std::optional<Mat3> invert(const Mat3& m) {
  Mat3 inv{};
  inv[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  inv[0][1] = m[0][2] * m[2][1] - m[0][1] * m[2][2];
  inv[0][2] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
  inv[1][0] = m[1][2] * m[2][0] - m[1][0] * m[2][2];
  inv[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
  inv[1][2] = m[0][2] * m[1][0] - m[0][0] * m[1][2];
  inv[2][0] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  inv[2][1] = m[0][1] * m[2][0] - m[0][0] * m[2][1];
  inv[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  const double det = m[0][0] * inv[0][0] + m[0][1] * inv[1][0] + m[0][2] * inv[2][0];
  const double scale = std::abs(m[0][0] * m[1][1] * m[2][2]);
  if (!(scale > 0.0) || std::abs(det) <= 1e-12 * scale) return std::nullopt;
  for (auto& row : inv)
    for (auto& v : row) v /= det;
  return inv;
}

/// Angle reduced to [0, 180) so cos 2θ / sin 2θ see small arguments.
double reduce_half_turn(double angle_deg) {
  double r = std::fmod(angle_deg, 180.0);
  if (r < 0.0) r += 180.0;
  return r;
}

optics::Arm scanned_arm_of(std::uint8_t profile_id) {
  const auto& table = payload::default_profiles();
  const auto it = table.find(profile_id);
  return it == table.end() ? optics::Arm::signal : it->second.rotated_arm;
}

}  // namespace

std::optional<DarkEstimate> estimate_darks(const payload::OnboardFile& file, const AnalysisOptions& options) {
  if (file.dark_records.empty()) return std::nullopt;
  DarkEstimate d;
  double temp_sum = 0.0;
  for (const auto& r : file.dark_records) {
    const double seconds = r.integration_ms / 1000.0;
    const double t1 = r.t1_centi_c / 100.0;
    const double to_ref = std::exp2(-(t1 - options.reference_temperature_c) / options.dark_doubling_c);
    d.mean_cps[0] += r.s1 / seconds;
    d.mean_cps[1] += r.s2 / seconds;
    d.reference_cps[0] += r.s1 / seconds * to_ref;
    d.reference_cps[1] += r.s2 / seconds * to_ref;
    temp_sum += t1;
  }
  d.records = file.dark_records.size();
  const auto n = static_cast<double>(d.records);
  for (std::size_t arm = 0; arm < 2; ++arm) {
    d.mean_cps[arm] /= n;
    d.reference_cps[arm] /= n;
  }
  d.mean_temperature_c = temp_sum / n;
  return d;
}

IntegratedScan integrate_runs(const payload::OnboardFile& file, const AnalysisOptions& options) {
  IntegratedScan scan;
  scan.total_run_count = file.runs.size();
  scan.darks = estimate_darks(file, options);
  for (const auto& run : file.runs) {
    bool excluded = (run.flags & kExcludeRun) != 0;
    for (const auto& r : run.settings) excluded = excluded || (r.flags & kExcludeRun) != 0;
    if (excluded) continue;
    ++scan.valid_run_count;
    for (std::size_t k = 0; k < payload::kSettingsPerRun; ++k) {
      const auto& r = run.settings[k];
      scan.angle_deg[k] = r.angle_centideg / 100.0;
      scan.s1[k] += r.s1;
      scan.s2[k] += r.s2;
      scan.coinc[k] += r.coinc;
      scan.integration_s[k] += r.integration_ms / 1000.0;
    }
  }
  if (scan.valid_run_count == 0) throw Error("no_valid_runs", "no run without dropout or saturation flags");
  return scan;
}

CorrectedScan subtract_background(const IntegratedScan& scan, double tau) {
  CorrectedScan out;
  for (std::size_t k = 0; k < payload::kSettingsPerRun; ++k) {
    const double n1 = static_cast<double>(scan.s1[k]);
    const double n2 = static_cast<double>(scan.s2[k]);
    const double nc = static_cast<double>(scan.coinc[k]);
    const double t = scan.integration_s[k];
    out.angle_deg[k] = scan.angle_deg[k];
    out.integration_s[k] = t;
    out.raw[k] = nc;
    if (t <= 0.0) {
      out.corrected[k] = nc;
      out.variance[k] = nc;
      continue;
    }
    const double k_acc = tau / t;
    out.accidentals[k] = n1 * n2 * k_acc;
    out.corrected[k] = nc - out.accidentals[k];
    // Var(N1 N2 k) for independent Poisson N1, N2 to first order.
    out.variance[k] = nc + k_acc * k_acc * (n2 * n2 * n1 + n1 * n1 * n2);
  }
  return out;
}

double MalusFit::model(double angle_deg) const {
  const double th = 2.0 * reduce_half_turn(angle_deg) * kDeg;
  return mean + cos_amplitude * std::cos(th) + sin_amplitude * std::sin(th);
}

MalusFit fit_malus(std::span<const double> angles, std::span<const double> values,
                   std::span<const double> variances) {
  if (angles.size() != values.size() || angles.size() != variances.size())
    throw Error("invalid_argument", "angle, value and variance lengths differ");
  for (double v : variances)
    if (!(v > 0.0)) throw Error("invalid_argument", "variances must be positive");

  std::vector<double> distinct;
  for (double a : angles) {
    const double r = reduce_half_turn(a);
    if (std::none_of(distinct.begin(), distinct.end(), [&](double d) {
          const double diff = std::abs(d - r);
          return std::min(diff, 180.0 - diff) < 1e-9;
        }))
      distinct.push_back(r);
  }
  if (angles.size() < 4 || distinct.size() < 3)
    throw Error("singular_design", "need at least 4 points at 3 distinct angles modulo 180 degrees");

  Mat3 normal{};
  std::array<double, 3> rhs{};
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double th = 2.0 * reduce_half_turn(angles[i]) * kDeg;
    const std::array<double, 3> x{1.0, std::cos(th), std::sin(th)};
    const double w = 1.0 / variances[i];
    for (std::size_t r = 0; r < 3; ++r) {
      rhs[r] += w * x[r] * values[i];
      for (std::size_t c = 0; c < 3; ++c) normal[r][c] += w * x[r] * x[c];
    }
  }
  const auto cov = invert(normal);
  if (!cov) throw Error("singular_design", "Malus design matrix is singular");

  MalusFit fit;
  fit.covariance = *cov;
  fit.points = angles.size();
  std::array<double, 3> p{};
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) p[r] += (*cov)[r][c] * rhs[c];
  const auto [a, b, c] = p;
  fit.mean = a;
  fit.cos_amplitude = b;
  fit.sin_amplitude = c;

  const double amp = std::hypot(b, c);
  fit.visibility = amp / a;
  // Amplitudes at rounding level carry no phase.
  fit.phase_defined = amp > 1e-12 * std::abs(a);
  fit.phase_deg = fit.phase_defined ? 0.5 * std::atan2(c, b) / kDeg : 0.0;

  // First-order propagation through V = |(b, c)| / a and θ0 = ½ atan2(c, b).
  const auto& S = *cov;
  auto quad = [&](const std::array<double, 3>& g) {
    double s = 0.0;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t q = 0; q < 3; ++q) s += g[r] * S[r][q] * g[q];
    return std::sqrt(std::max(0.0, s));
  };
  if (fit.phase_defined) {
    fit.sigma_visibility = quad({-amp / (a * a), b / (amp * a), c / (amp * a)});
    fit.sigma_phase_deg = quad({0.0, -0.5 * c / (amp * amp), 0.5 * b / (amp * amp)}) / kDeg;
  } else {
    // At zero amplitude V is not differentiable; bound it by the amplitude error.
    fit.sigma_visibility = std::sqrt(std::max(S[1][1], S[2][2])) / std::abs(a);
    fit.sigma_phase_deg = std::numeric_limits<double>::infinity();
  }

  double chi2 = 0.0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double r = values[i] - fit.model(angles[i]);
    chi2 += r * r / variances[i];
  }
  fit.chi2_per_dof = angles.size() > 3 ? chi2 / static_cast<double>(angles.size() - 3) : 0.0;
  return fit;
}

MalusFit fit_corrected(const CorrectedScan& scan) {
  return fit_malus(scan.angle_deg, scan.corrected, scan.variance);
}

double bootstrap_sigma_visibility(const IntegratedScan& scan, double tau, int resamples, Rng& rng) {
  if (resamples < 2) throw Error("invalid_argument", "bootstrap needs at least 2 resamples");
  auto draw = [&](std::uint64_t mean) -> std::uint64_t {
    if (mean == 0) return 0;
    return std::poisson_distribution<std::uint64_t>(static_cast<double>(mean))(rng);
  };
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(resamples));
  for (int i = 0; i < resamples; ++i) {
    IntegratedScan resampled = scan;
    for (std::size_t k = 0; k < payload::kSettingsPerRun; ++k) {
      resampled.s1[k] = draw(scan.s1[k]);
      resampled.s2[k] = draw(scan.s2[k]);
      resampled.coinc[k] = draw(scan.coinc[k]);
    }
    auto corrected = subtract_background(resampled, tau);
    for (auto& var : corrected.variance) var = std::max(var, 1.0);
    v.push_back(fit_corrected(corrected).visibility);
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

TrendFit dark_trend(std::span<const TrendPoint> series, double rise_threshold_cps) {
  std::vector<TrendPoint> pts(series.begin(), series.end());
  std::stable_sort(pts.begin(), pts.end(),
                   [](const TrendPoint& l, const TrendPoint& r) { return l.elapsed_days < r.elapsed_days; });
  if (pts.size() < 2 || pts.front().elapsed_days == pts.back().elapsed_days)
    throw Error("insufficient_epochs", "dark trend needs at least two distinct epochs");

  const auto n = static_cast<double>(pts.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mx += p.elapsed_days;
    my += p.cps;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    sxx += (p.elapsed_days - mx) * (p.elapsed_days - mx);
    sxy += (p.elapsed_days - mx) * (p.cps - my);
  }

  TrendFit fit;
  fit.epochs = pts.size();
  fit.slope_cps_per_day = sxy / sxx;
  fit.intercept_cps = my - fit.slope_cps_per_day * mx;
  if (pts.size() > 2) {
    double sse = 0.0;
    for (const auto& p : pts) {
      const double r = p.cps - (fit.intercept_cps + fit.slope_cps_per_day * p.elapsed_days);
      sse += r * r;
    }
    fit.slope_stderr = std::sqrt(sse / (n - 2.0) / sxx);
    const boost::math::students_t dist(n - 2.0);
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    fit.ci95_low = fit.slope_cps_per_day - t * fit.slope_stderr;
    fit.ci95_high = fit.slope_cps_per_day + t * fit.slope_stderr;
  } else {
    fit.slope_stderr = std::numeric_limits<double>::quiet_NaN();
    fit.ci95_low = -std::numeric_limits<double>::infinity();
    fit.ci95_high = std::numeric_limits<double>::infinity();
  }
  fit.rise_cps = pts.back().cps - pts.front().cps;
  fit.rise_flagged = fit.rise_cps > rise_threshold_cps;
  return fit;
}

FileAnalysis analyze_file(std::uint16_t file_id, const payload::OnboardFile& file, const AnalysisOptions& options) {
  FileAnalysis fa;
  fa.file_id = file_id;
  fa.header = file.header;
  fa.elapsed_days = static_cast<double>(file.header.start_epoch_s) / 86400.0;
  fa.scanned_arm = scanned_arm_of(file.header.profile_id);
  fa.darks = estimate_darks(file, options);
  if (file.runs.empty()) return fa;

  IntegratedScan scan;
  try {
    scan = integrate_runs(file, options);
  } catch (const Error& e) {
    if (e.code() != "no_valid_runs") throw;
    return fa;
  }
  auto corrected = subtract_background(scan, options.coincidence_window_s);
  double total_t = 0.0, s1 = 0.0, s2 = 0.0, raw = 0.0, corr = 0.0;
  for (std::size_t k = 0; k < payload::kSettingsPerRun; ++k) {
    total_t += scan.integration_s[k];
    s1 += static_cast<double>(scan.s1[k]);
    s2 += static_cast<double>(scan.s2[k]);
    raw += static_cast<double>(scan.coinc[k]);
    corr += corrected.corrected[k];
  }
  fa.mean_s1_cps = s1 / total_t;
  fa.mean_s2_cps = s2 / total_t;
  fa.mean_raw_coinc_cps = raw / total_t;
  fa.mean_corrected_coinc_cps = corr / total_t;

  for (auto& v : corrected.variance) v = std::max(v, 1.0);
  fa.fit = fit_corrected(corrected);
  if (options.bootstrap) {
    Rng rng(options.bootstrap_seed ^ file_id);
    fa.bootstrap_sigma_visibility =
        bootstrap_sigma_visibility(scan, options.coincidence_window_s, options.bootstrap_resamples, rng);
  }
  fa.scan = scan;
  fa.corrected = corrected;
  return fa;
}

CampaignReport build_report(std::vector<FileAnalysis> files, const AnalysisOptions& options) {
  if (files.empty()) throw Error("empty_archive", "no analyzed files to report");
  std::stable_sort(files.begin(), files.end(),
                   [](const FileAnalysis& a, const FileAnalysis& b) { return a.file_id < b.file_id; });
  CampaignReport report;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    std::vector<TrendPoint> series;
    for (const auto& f : files)
      if (f.darks) series.push_back({f.elapsed_days, f.darks->reference_cps[arm]});
    try {
      report.dark_trends[arm] = dark_trend(series, options.dark_rise_threshold_cps);
    } catch (const Error& e) {
      if (e.code() != "insufficient_epochs") throw;
    }
  }
  report.files = std::move(files);
  return report;
}

}  // namespace pairsat::analysis
