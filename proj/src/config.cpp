#include "pairsat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "pairsat/crc.hpp"
#include "pairsat/error.hpp"

namespace pairsat {

namespace {

using nlohmann::json;

class Writer {
 public:
  explicit Writer(json& out) : out_(out) {}
  template <typename T>
  void operator()(const char* key, const T& value) {
    out_[key] = value;
  }
  template <typename F>
  void block(const char* key, F&& fill) {
    json sub = json::object();
    Writer w(sub);
    fill(w);
    out_[key] = std::move(sub);
  }

 private:
  json& out_;
};

class Reader {
 public:
  Reader(const json& in, std::string path) : in_(in), path_(std::move(path)) {
    if (!in_.is_object()) throw Error("invalid_config", "'" + path_ + "' must be an object");
  }
  ~Reader() = default;

  template <typename T>
  void operator()(const char* key, T& value) {
    seen_.insert(key);
    const auto it = in_.find(key);
    if (it == in_.end()) return;
    try {
      value = it->template get<T>();
    } catch (const json::exception&) {
      throw Error("invalid_config", "wrong type for '" + qualified(key) + "'");
    }
  }
  template <typename F>
  void block(const char* key, F&& fill) {
    seen_.insert(key);
    const auto it = in_.find(key);
    if (it == in_.end()) return;
    Reader r(*it, qualified(key));
    fill(r);
    r.finish();
  }
  void finish() const {
    for (const auto& [k, v] : in_.items())
      if (!seen_.contains(k)) throw Error("invalid_config", "unknown key '" + qualified(k.c_str()) + "'");
  }

 private:
  std::string qualified(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& in_;
  std::string path_;
  std::set<std::string> seen_;
};

// One field list drives both directions, so the document schema cannot drift
// between reading and writing.
template <typename V, typename C>
void visit_config(V& v, C& c) {
  v("seed", c.seed);
  v.block("source", [&](auto& b) {
    auto& s = c.source;
    b("pump_power_ref_mw", s.pump_power_ref_mw);
    b("pump_power_max_mw", s.pump_power_max_mw);
    b("mean_coinc_ref_cps", s.mean_coinc_ref_cps);
    b("mean_singles_spdc_ref_cps", s.mean_singles_spdc_ref_cps);
    b("visibility_rotator", s.visibility_rotator);
    b("pbs_extinction", s.pbs_extinction);
    b("align_temperature_c", s.align_temperature_c);
    b("tilt_coeff_urad_per_c", s.tilt_coeff_urad_per_c);
    b("tilt_half_angle_urad", s.tilt_half_angle_urad);
    b("coincidence_window_s", s.coincidence_window_s);
    b("singles_phase_deg", s.singles_phase_deg);
    b("signal_wavelength_nm", s.signal_wavelength_nm);
    b("idler_wavelength_nm", s.idler_wavelength_nm);
    b("pump_wavelength_nm", s.pump_wavelength_nm);
    b("bandwidth_fwhm_nm", s.bandwidth_fwhm_nm);
    b("crystal_length_mm", s.crystal_length_mm);
    b("phase_match_angle_deg", s.phase_match_angle_deg);
  });
  v.block("detectors", [&](auto& b) {
    auto& d = c.detectors;
    b("dark_ref_cps", d.dark_ref_cps);
    b("radiation_slope_cps_per_day", d.radiation_slope_cps_per_day);
    b("dark_doubling_c", d.dark_doubling_c);
    b("reference_temperature_c", d.reference_temperature_c);
    b("linear_limit_cps", d.linear_limit_cps);
    b("bias_mv", d.bias_mv);
    b("efficiency_scale", d.efficiency_scale);
  });
  v.block("orbit", [&](auto& b) {
    auto& o = c.orbit;
    b("altitude_km", o.altitude_km);
    b("inclination_deg", o.inclination_deg);
    b("raan_deg", o.raan_deg);
    b("phase_deg", o.phase_deg);
    b("earth_rotation_rad_per_s", o.earth_rotation_rad_per_s);
  });
  v.block("ambient", [&](auto& b) {
    auto& a = c.ambient;
    b("mid_c", a.mid_c);
    b("amplitude_c", a.amplitude_c);
    b("phase_rad", a.phase_rad);
    b("period_s", a.period_s);
  });
  v.block("thermal", [&](auto& b) {
    auto& t = c.thermal;
    b("relaxation_s", t.relaxation_s);
    b("heater_rate_c_per_min", t.heater_rate_c_per_min);
    b("t2_heater_offset_c", t.t2_heater_offset_c);
    b("heater_smoothing_s", t.heater_smoothing_s);
  });
  v.block("station", [&](auto& b) {
    auto& s = c.station;
    b("name", s.name);
    b("lat_deg", s.lat_deg);
    b("lon_deg", s.lon_deg);
    b("mask_deg", s.mask_deg);
  });
  v.block("power", [&](auto& b) {
    auto& p = c.power;
    b("peak_w", p.peak_w);
    b("peak_minutes", p.peak_minutes);
    b("sustained_w", p.sustained_w);
    b("battery_budget_wh", p.battery_budget_wh);
  });
  v.block("payload", [&](auto& b) {
    auto& p = c.payload;
    b("rotator_angles_deg", p.rotator_angles_deg);
    b("fixed_angle_deg", p.fixed_angle_deg);
    b.block("lasing", [&](auto& l) {
      l("slope_mw_per_ma", p.lasing.slope_mw_per_ma);
      l("threshold_ma", p.lasing.threshold_ma);
    });
    b("modehop_rate_per_s", p.modehop_rate_per_s);
    b("modehop_min_s", p.modehop_min_s);
    b("modehop_max_s", p.modehop_max_s);
    b("thermostat_hold", p.thermostat_hold);
    b("thermostat_hysteresis_c", p.thermostat_hysteresis_c);
    b("hv_variant_offset_mv", p.hv_variant_offset_mv);
  });
  v.block("link", [&](auto& b) { b("bit_error_rate", c.link.bit_error_rate); });
  v.block("analysis", [&](auto& b) {
    auto& a = c.analysis;
    b("coincidence_window_s", a.coincidence_window_s);
    b("reference_temperature_c", a.reference_temperature_c);
    b("dark_doubling_c", a.dark_doubling_c);
    b("dark_rise_threshold_cps", a.dark_rise_threshold_cps);
    b("bootstrap", a.bootstrap);
    b("bootstrap_resamples", a.bootstrap_resamples);
    b("bootstrap_seed", a.bootstrap_seed);
  });
  v.block("cadence", [&](auto& b) {
    b("api_clock_rate", c.cadence.api_clock_rate);
    b("pass_lookahead_days", c.cadence.pass_lookahead_days);
  });
}

}  // namespace

void MissionConfig::validate() const {
  source.validate();
  detectors.validate();
  orbit.validate();
  if (!(thermal.relaxation_s > 0.0) || !(thermal.heater_smoothing_s > 0.0))
    throw Error("invalid_config", "thermal time constants must be positive");
  if (!(link.bit_error_rate >= 0.0 && link.bit_error_rate < 1.0))
    throw Error("invalid_config", "link.bit_error_rate must be in [0, 1)");
  if (payload.modehop_rate_per_s < 0.0 || payload.modehop_min_s < 0.0 || payload.modehop_max_s < payload.modehop_min_s)
    throw Error("invalid_config", "mode-hop parameters out of range");
  if (!(analysis.coincidence_window_s >= 0.0) || !(analysis.dark_doubling_c > 0.0))
    throw Error("invalid_config", "analysis parameters out of range");
  if (cadence.api_clock_rate < 0.0 || cadence.pass_lookahead_days < 1)
    throw Error("invalid_config", "cadence parameters out of range");
}

MissionConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("invalid_config", std::string("config is not valid JSON: ") + e.what());
  }
  MissionConfig config;
  Reader reader(doc, "");
  visit_config(reader, config);
  reader.finish();
  config.validate();
  config.payload.config_hash = config_hash(config);
  return config;
}

MissionConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

nlohmann::json to_json(const MissionConfig& config) {
  json out = json::object();
  Writer writer(out);
  visit_config(writer, config);
  return out;
}

std::string dump_config(const MissionConfig& config) { return to_json(config).dump(2); }

std::uint32_t config_hash(const MissionConfig& config) {
  const std::string text = to_json(config).dump();
  return crc32({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace pairsat
