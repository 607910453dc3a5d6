#include "pairsat/archive.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pairsat/error.hpp"

namespace pairsat::archive {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON has no NaN or infinity.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << text;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const char* arm_name(optics::Arm arm) { return arm == optics::Arm::signal ? "signal" : "idler"; }

}  // namespace

std::string file_stem(std::uint16_t file_id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04u", static_cast<unsigned>(file_id));
  return buf;
}

json to_json(const analysis::MalusFit& f) {
  return {{"mean", f.mean},
          {"cos_amplitude", f.cos_amplitude},
          {"sin_amplitude", f.sin_amplitude},
          {"visibility", f.visibility},
          {"sigma_visibility", number(f.sigma_visibility)},
          {"phase_deg", f.phase_deg},
          {"phase_defined", f.phase_defined},
          {"sigma_phase_deg", number(f.sigma_phase_deg)},
          {"chi2_per_dof", number(f.chi2_per_dof)},
          {"points", f.points}};
}

json to_json(const analysis::TrendFit& t) {
  return {{"slope_cps_per_day", t.slope_cps_per_day},
          {"intercept_cps", t.intercept_cps},
          {"slope_stderr", number(t.slope_stderr)},
          {"ci95", {number(t.ci95_low), number(t.ci95_high)}},
          {"rise_cps", t.rise_cps},
          {"rise_flagged", t.rise_flagged},
          {"epochs", t.epochs}};
}

json to_json(const analysis::FileAnalysis& a) {
  json j{{"file_id", a.file_id},
         {"profile_id", payload::format_profile_id(a.header.profile_id)},
         {"start_epoch_s", a.header.start_epoch_s},
         {"elapsed_days", a.elapsed_days},
         {"bias_mv", a.header.bias_mv},
         {"config_hash", a.header.config_hash},
         {"heating_s", a.header.heating_s},
         {"heating_timeout", (a.header.flags & payload::header_flags::heating_timeout) != 0},
         {"scanned_arm", arm_name(a.scanned_arm)}};
  if (a.darks) {
    j["darks"] = {{"records", a.darks->records},
                  {"mean_cps", a.darks->mean_cps},
                  {"reference_cps", a.darks->reference_cps},
                  {"mean_temperature_c", a.darks->mean_temperature_c}};
  } else {
    j["darks"] = nullptr;
  }
  if (a.scan) {
    j["runs"] = {{"valid", a.scan->valid_run_count}, {"total", a.scan->total_run_count}};
    j["mean_rates_cps"] = {{"s1", a.mean_s1_cps},
                           {"s2", a.mean_s2_cps},
                           {"raw_coincidences", a.mean_raw_coinc_cps},
                           {"corrected_coincidences", a.mean_corrected_coinc_cps}};
  } else {
    j["runs"] = nullptr;
  }
  if (a.fit) {
    j["fit"] = to_json(*a.fit);
    if (a.bootstrap_sigma_visibility > 0) j["fit"]["bootstrap_sigma_visibility"] = a.bootstrap_sigma_visibility;
    j["visibility"] = a.fit->visibility;
  } else {
    j["fit"] = nullptr;
    j["visibility"] = nullptr;
  }
  return j;
}

json to_json(const analysis::CampaignReport& r) {
  json files = json::array();
  for (const auto& f : r.files) files.push_back(to_json(f));
  json trends = json::object();
  for (int arm = 0; arm < 2; ++arm) {
    const char* key = arm == 0 ? "detector_1" : "detector_2";
    trends[key] = r.dark_trends[arm] ? to_json(*r.dark_trends[arm]) : json(nullptr);
  }
  return {{"files", files}, {"dark_trends", trends}};
}

json to_json(const link::DownlinkSession& s) {
  json passes = json::array();
  for (const auto& p : s.passes_used) passes.push_back({{"start", p.start}, {"end", p.end}, {"frames_sent", p.frames_sent}});
  return {{"file_id", s.file_id},
          {"frames_sent", s.frames_sent},
          {"frames_acked", s.frames_acked},
          {"frames_lost", s.frames_lost},
          {"bits_on_air", s.bits_on_air},
          {"on_air_s", s.on_air_s()},
          {"integrity_resets", s.integrity_resets},
          {"completed", s.completed},
          {"completed_at", s.completed ? json(s.completed_at) : json(nullptr)},
          {"passes_used", passes}};
}

json to_json(const env::Pass& p) {
  return {{"aos", p.aos_epoch}, {"los", p.los_epoch}, {"duration_s", p.duration_s()}, {"max_elevation_deg", p.max_elevation_deg}};
}

json to_json(const payload::ExperimentProfile& p) {
  json pump = nullptr;
  if (p.pump.mode == payload::PumpMode::constant_power) pump = {{"mode", "constant_power"}, {"mw", p.pump.value}};
  if (p.pump.mode == payload::PumpMode::constant_current) pump = {{"mode", "constant_current"}, {"ma", p.pump.value}};
  return {{"id", payload::format_profile_id(p.id)},
          {"heating_min", p.heating_budget_min},
          {"dark_min", p.dark_min},
          {"expt_min", p.expt_min},
          {"pump", pump},
          {"memory", std::string(payload::to_string(p.memory))},
          {"turn_on_temp_c", p.turn_on_temp_c ? json(*p.turn_on_temp_c) : json(nullptr)},
          {"scanned_arm", arm_name(p.rotated_arm)},
          {"hv_variant", p.hv_variant}};
}

json to_json(const mission::MissionEvent& e) { return {{"epoch", e.epoch}, {"type", e.type}, {"data", e.data}}; }

json to_json(const payload::OnboardFile& f) {
  auto record = [](const payload::SettingRecord& r) {
    return json{{"setting", r.setting_index}, {"angle_deg", r.angle_centideg / 100.0},
                {"integration_ms", r.integration_ms}, {"s1", r.s1}, {"s2", r.s2}, {"coinc", r.coinc},
                {"t1_c", r.t1_centi_c / 100.0}, {"t2_c", r.t2_centi_c / 100.0}, {"hv_mv", r.hv_mv},
                {"flags", r.flags}};
  };
  json darks = json::array();
  for (const auto& r : f.dark_records) darks.push_back(record(r));
  json runs = json::array();
  for (const auto& run : f.runs) {
    json settings = json::array();
    for (const auto& s : run.settings) settings.push_back(record(s));
    runs.push_back({{"seq", run.seq}, {"epoch_offset_s", run.epoch_offset_s}, {"pump_mw", run.pump_centi_mw / 100.0},
                    {"flags", run.flags}, {"settings", settings}});
  }
  return {{"header",
           {{"version", f.header.version},
            {"profile_id", payload::format_profile_id(f.header.profile_id)},
            {"start_epoch_s", f.header.start_epoch_s},
            {"bias_mv", f.header.bias_mv},
            {"config_hash", f.header.config_hash},
            {"flags", f.header.flags},
            {"heating_s", f.header.heating_s}}},
          {"dark_records", darks},
          {"runs", runs}};
}

void write_report(const analysis::CampaignReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");

  std::string darks = "epoch_s,elapsed_days,arm,cps,reference_cps,temperature_c\n";
  for (const auto& f : report.files) {
    if (f.darks) {
      for (int arm = 0; arm < 2; ++arm) {
        darks += std::to_string(f.header.start_epoch_s) + "," + fmt(f.elapsed_days) + "," + std::to_string(arm + 1) +
                 "," + fmt(f.darks->mean_cps[arm]) + "," + fmt(f.darks->reference_cps[arm]) + "," +
                 fmt(f.darks->mean_temperature_c) + "\n";
      }
    }
    if (!f.corrected) continue;
    std::string scan = "angle_deg,raw_counts,accidentals,corrected_counts,sigma,integration_s,model\n";
    const auto& c = *f.corrected;
    for (std::size_t i = 0; i < c.angle_deg.size(); ++i) {
      scan += fmt(c.angle_deg[i]) + "," + fmt(c.raw[i]) + "," + fmt(c.accidentals[i]) + "," + fmt(c.corrected[i]) + "," +
              fmt(std::sqrt(c.variance[i])) + "," + fmt(c.integration_s[i]) + "," +
              (f.fit ? fmt(f.fit->model(c.angle_deg[i])) : std::string()) + "\n";
    }
    write_text(dir / ("scan_" + file_stem(f.file_id) + ".csv"), scan);
    if (f.fit) {
      std::string curve = "angle_deg,model\n";
      for (int a = 0; a <= 360; ++a) curve += std::to_string(a) + "," + fmt(f.fit->model(a)) + "\n";
      write_text(dir / ("curve_" + file_stem(f.file_id) + ".csv"), curve);
    }
  }
  write_text(dir / "darks.csv", darks);
}

void write_archive(const mission::Mission& m, const fs::path& dir) {
  fs::create_directories(dir / "files");
  fs::create_directories(dir / "sessions");
  fs::create_directories(dir / "analysis");
  for (const auto& [id, a] : m.archive()) {
    write_bytes(dir / "files" / (file_stem(id) + ".bin"), a.image);
    write_text(dir / "analysis" / (file_stem(id) + ".json"), to_json(a.analysis).dump(2) + "\n");
  }
  for (const auto& [id, s] : m.sessions()) write_text(dir / "sessions" / (file_stem(id) + ".json"), to_json(s).dump(2) + "\n");

  std::string log;
  for (const auto& e : m.events()) log += to_json(e).dump() + "\n";
  write_text(dir / "events.log", log);

  if (m.archive().empty()) {
    write_text(dir / "report.json", json{{"files", json::array()}, {"dark_trends", nullptr}}.dump(2) + "\n");
    write_text(dir / "darks.csv", "epoch_s,elapsed_days,arm,cps,reference_cps,temperature_c\n");
  } else {
    write_report(m.report(), dir);
  }
}

analysis::CampaignReport analyze_archive(const fs::path& in, const analysis::AnalysisOptions& options) {
  const auto files_dir = in / "files";
  std::vector<fs::path> images;
  if (fs::is_directory(files_dir)) {
    for (const auto& entry : fs::directory_iterator(files_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".bin") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  std::vector<analysis::FileAnalysis> analyses;
  for (const auto& path : images) {
    const auto bytes = read_bytes(path);
    const auto file = payload::decode_file(bytes);
    unsigned long id = 0;
    try {
      id = std::stoul(path.stem().string());
    } catch (const std::exception&) {
      id = analyses.size() + 1;
    }
    analyses.push_back(analysis::analyze_file(static_cast<std::uint16_t>(id), file, options));
  }
  return analysis::build_report(std::move(analyses), options);
}

}  // namespace pairsat::archive
