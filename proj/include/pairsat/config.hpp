#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "pairsat/analysis.hpp"
#include "pairsat/controller.hpp"
#include "pairsat/environment.hpp"
#include "pairsat/optics.hpp"

namespace pairsat {

struct LinkConfig {
  double bit_error_rate = 1e-5;
};

struct CadenceConfig {
  /// Simulated seconds per wall-clock second when the ops API clock runs.
  double api_clock_rate = 0.0;
  /// How far ahead the mission keeps its pass list.
  int pass_lookahead_days = 2;
};

/// Every tunable of the mission, serialized as one JSON document. Keys not
/// listed here are rejected; missing keys keep their defaults.
struct MissionConfig {
  std::uint64_t seed = 20151216;
  optics::SourceModel source;
  optics::DetectorModel detectors;
  env::OrbitModel orbit;
  env::AmbientCycle ambient;
  env::ThermalParams thermal;
  env::GroundStation station;
  env::PowerModel power;
  payload::ControllerConfig payload;
  LinkConfig link;
  analysis::AnalysisOptions analysis;
  CadenceConfig cadence;

  void validate() const;
};

/// Throws pairsat::Error("invalid_config") on syntax errors, unknown keys,
/// wrong types or out-of-range values.
MissionConfig parse_config(std::string_view text);
MissionConfig load_config_file(const std::string& path);

nlohmann::json to_json(const MissionConfig& config);
/// Canonical text form (sorted keys, 2-space indent).
std::string dump_config(const MissionConfig& config);
/// CRC-32 of the canonical form; stamped into every onboard file.
std::uint32_t config_hash(const MissionConfig& config);

}  // namespace pairsat
