#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairsat/analysis.hpp"
#include "pairsat/config.hpp"
#include "pairsat/controller.hpp"
#include "pairsat/environment.hpp"
#include "pairsat/profiles.hpp"
#include "pairsat/rng.hpp"
#include "pairsat/telemetry.hpp"

namespace pairsat::mission {

enum class CommandType { run_profile, set_parameter };

/// A ground command. It waits in the ground queue from `submit_epoch` until
/// the next contact, then runs onboard at `execute_epoch` (or on receipt).
struct Command {
  std::string id;
  CommandType type = CommandType::run_profile;
  std::uint8_t profile_id = 0;
  std::int64_t submit_epoch = 0;
  std::optional<std::int64_t> execute_epoch;
  std::string key;  ///< set_parameter: bias_mv, fixed_angle_deg, thermostat_hold
  double value = 0.0;
};

/// Parses one command object. Accepts "at_s"/"at_day" for the submit time
/// and "execute_s"/"execute_day" for a time tag. Throws Error("malformed_command").
Command parse_command(const nlohmann::json& j, std::int64_t default_submit_epoch = 0);
nlohmann::json to_json(const Command& c);
std::vector<Command> parse_schedule(std::string_view text);
std::vector<Command> load_schedule_file(const std::string& path);

struct MissionEvent {
  std::int64_t epoch = 0;
  std::string type;
  nlohmann::json data;
};

struct ArchivedFile {
  std::uint16_t file_id = 0;
  std::vector<std::uint8_t> image;
  payload::OnboardFile file;
  link::DownlinkSession session;
  analysis::FileAnalysis analysis;
};

/// A file sitting in the spacecraft's single storage slot.
struct StoredFile {
  std::uint16_t file_id = 0;
  std::uint8_t profile_id = 0;
  std::int64_t ready_epoch = 0;
  std::vector<std::uint8_t> image;
  std::unique_ptr<link::Downlink> downlink;
};

struct RunningProfile {
  payload::ExperimentProfile profile;
  payload::ProfileResult result;
  std::string command_id;
};

/// Deterministic mission simulation advanced in 1 s ticks. Not thread-safe;
/// the ops server serializes access.
class Mission {
 public:
  explicit Mission(MissionConfig config);

  const MissionConfig& config() const { return config_; }
  std::int64_t epoch() const { return epoch_; }
  std::uint64_t version() const { return version_; }

  /// Queues a command ground-side. Throws Error("duplicate_command") or
  /// ("unknown_profile") / ("malformed_command").
  void submit(Command command);

  void advance(std::int64_t seconds);
  void run_until(std::int64_t epoch);

  bool busy() const { return running_.has_value(); }
  const std::optional<RunningProfile>& running() const { return running_; }
  payload::Phase current_phase() const;
  env::ThermalState thermal() const;

  const std::deque<Command>& ground_queue() const { return ground_queue_; }
  const std::deque<Command>& onboard_queue() const { return onboard_queue_; }
  const std::optional<StoredFile>& slot() const { return slot_; }
  const std::map<std::uint16_t, ArchivedFile>& archive() const { return archive_; }
  const std::map<std::uint16_t, link::DownlinkSession>& sessions() const { return sessions_; }
  const std::vector<MissionEvent>& events() const { return events_; }
  std::optional<env::Pass> current_pass() const { return current_pass_; }

  /// The next `count` passes that have not ended yet.
  std::vector<env::Pass> upcoming_passes(std::size_t count);

  /// Throws Error("empty_archive") before any file has been downlinked.
  analysis::CampaignReport report() const;

  nlohmann::json state_json() const;

 private:
  void tick();
  void ensure_passes(std::int64_t horizon);
  void log(std::int64_t epoch, std::string type, nlohmann::json data = nlohmann::json::object());
  void dispatch_ground_queue();
  void execute_onboard();
  void start_profile(const Command& command);
  void complete_profile();
  void transmit();
  void archive_slot();
  void apply_parameter(const Command& command);
  void check_command(const Command& command) const;

  MissionConfig config_;
  payload::ProfileTable profiles_;
  std::int64_t epoch_ = 0;
  std::uint64_t version_ = 0;
  env::ThermalState thermal_;
  Rng counts_rng_;
  Rng modehop_rng_;
  Rng channel_rng_;

  env::PassScanner scanner_;
  std::deque<env::Pass> passes_;
  std::optional<env::Pass> current_pass_;

  std::vector<Command> scheduled_;  ///< submit_epoch in the future, ordered
  std::deque<Command> ground_queue_;
  std::deque<Command> onboard_queue_;
  std::map<std::string, bool> command_ids_;

  std::optional<RunningProfile> running_;
  std::size_t running_event_cursor_ = 0;
  std::optional<StoredFile> slot_;
  std::uint16_t next_file_id_ = 1;
  std::map<std::uint16_t, link::DownlinkSession> sessions_;
  std::map<std::uint16_t, ArchivedFile> archive_;
  std::vector<MissionEvent> events_;
};

/// Runs a batch campaign at full speed from launch for `duration_days`.
std::unique_ptr<Mission> run_campaign(const MissionConfig& config, double duration_days,
                                      const std::vector<Command>& schedule);

}  // namespace pairsat::mission
