#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "pairsat/analysis.hpp"
#include "pairsat/environment.hpp"
#include "pairsat/mission.hpp"
#include "pairsat/profiles.hpp"
#include "pairsat/telemetry.hpp"

namespace pairsat::archive {

nlohmann::json to_json(const analysis::MalusFit& fit);
nlohmann::json to_json(const analysis::TrendFit& trend);
nlohmann::json to_json(const analysis::FileAnalysis& file);
nlohmann::json to_json(const analysis::CampaignReport& report);
nlohmann::json to_json(const link::DownlinkSession& session);
nlohmann::json to_json(const env::Pass& pass);
nlohmann::json to_json(const payload::ExperimentProfile& profile);
nlohmann::json to_json(const mission::MissionEvent& event);
nlohmann::json to_json(const payload::OnboardFile& file);

/// Directory layout:
///   files/NNNN.bin  sessions/NNNN.json  analysis/NNNN.json
///   events.log (JSON lines)  report.json  scan_NNNN.csv  darks.csv
void write_archive(const mission::Mission& mission, const std::filesystem::path& dir);

/// report.json, scan_NNNN.csv and darks.csv for a report.
void write_report(const analysis::CampaignReport& report, const std::filesystem::path& dir);

/// Re-analyzes every files/*.bin under `in`. Throws Error("empty_archive")
/// when there are none, or the decode error of the first bad image.
analysis::CampaignReport analyze_archive(const std::filesystem::path& in, const analysis::AnalysisOptions& options);

std::string file_stem(std::uint16_t file_id);

}  // namespace pairsat::archive
