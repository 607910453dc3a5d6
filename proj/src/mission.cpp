#include "pairsat/mission.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pairsat/error.hpp"

namespace pairsat::mission {

namespace {

using nlohmann::json;

constexpr std::int64_t kDay = 86400;

[[noreturn]] void malformed(const std::string& what) { throw Error("malformed_command", what); }

std::int64_t read_time(const json& j, const char* seconds_key, const char* days_key, bool& present) {
  present = true;
  if (j.contains(seconds_key)) {
    if (!j[seconds_key].is_number()) malformed(std::string(seconds_key) + " must be a number");
    return static_cast<std::int64_t>(std::llround(j[seconds_key].get<double>()));
  }
  if (j.contains(days_key)) {
    if (!j[days_key].is_number()) malformed(std::string(days_key) + " must be a number");
    return static_cast<std::int64_t>(std::llround(j[days_key].get<double>() * kDay));
  }
  present = false;
  return 0;
}

bool known_parameter(const std::string& key) {
  return key == "bias_mv" || key == "fixed_angle_deg" || key == "thermostat_hold";
}

}  // namespace

Command parse_command(const json& j, std::int64_t default_submit_epoch) {
  if (!j.is_object()) malformed("command must be an object");
  static const std::vector<std::string> kKeys{"id", "type", "profile_id", "at_s", "at_day", "execute_s",
                                              "execute_day", "when", "key", "value"};
  for (const auto& [k, v] : j.items())
    if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) malformed("unknown command field '" + k + "'");

  Command c;
  if (j.contains("id")) {
    if (!j["id"].is_string() || j["id"].get<std::string>().empty()) malformed("id must be a nonempty string");
    c.id = j["id"].get<std::string>();
  }
  const std::string type = j.value("type", std::string("run_profile"));
  if (type == "run_profile") {
    c.type = CommandType::run_profile;
    if (!j.contains("profile_id")) malformed("run_profile needs profile_id");
    const auto& pid = j["profile_id"];
    try {
      c.profile_id = pid.is_string() ? payload::parse_profile_id(pid.get<std::string>())
                                     : payload::parse_profile_id(std::to_string(pid.get<int>()));
    } catch (const std::exception&) {
      malformed("bad profile_id");
    }
  } else if (type == "set_parameter") {
    c.type = CommandType::set_parameter;
    if (!j.contains("key") || !j["key"].is_string()) malformed("set_parameter needs a string key");
    c.key = j["key"].get<std::string>();
    if (!known_parameter(c.key)) malformed("unknown parameter '" + c.key + "'");
    if (!j.contains("value") || !(j["value"].is_number() || j["value"].is_boolean())) malformed("set_parameter needs a numeric value");
    c.value = j["value"].is_boolean() ? (j["value"].get<bool>() ? 1.0 : 0.0) : j["value"].get<double>();
  } else {
    malformed("unknown command type '" + type + "'");
  }

  bool present = false;
  c.submit_epoch = read_time(j, "at_s", "at_day", present);
  if (!present) c.submit_epoch = default_submit_epoch;
  const auto exec = read_time(j, "execute_s", "execute_day", present);
  if (present) c.execute_epoch = exec;
  if (j.contains("when")) {
    const auto& w = j["when"];
    if (w.is_string() && w.get<std::string>() == "next_window") {
      c.execute_epoch.reset();
    } else if (w.is_number()) {
      c.execute_epoch = static_cast<std::int64_t>(std::llround(w.get<double>()));
    } else {
      malformed("when must be \"next_window\" or an epoch in seconds");
    }
  }
  if (c.submit_epoch < 0) malformed("submit time must be nonnegative");
  return c;
}

json to_json(const Command& c) {
  json j{{"id", c.id}, {"submit_epoch", c.submit_epoch}};
  if (c.type == CommandType::run_profile) {
    j["type"] = "run_profile";
    j["profile_id"] = payload::format_profile_id(c.profile_id);
  } else {
    j["type"] = "set_parameter";
    j["key"] = c.key;
    j["value"] = c.value;
  }
  j["execute_epoch"] = c.execute_epoch ? json(*c.execute_epoch) : json(nullptr);
  return j;
}

std::vector<Command> parse_schedule(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(std::string("schedule is not valid JSON: ") + e.what());
  }
  if (doc.is_object() && doc.contains("commands")) doc = doc["commands"];
  if (!doc.is_array()) malformed("schedule must be an array of commands");
  std::vector<Command> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    auto c = parse_command(doc[i]);
    if (c.id.empty()) c.id = "cmd-" + std::to_string(i + 1);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Command> load_schedule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open schedule file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schedule(ss.str());
}

Mission::Mission(MissionConfig config)
    : config_(std::move(config)),
      profiles_(payload::default_profiles()),
      counts_rng_(make_substream(config_.seed, "counts")),
      modehop_rng_(make_substream(config_.seed, "modehop")),
      channel_rng_(make_substream(config_.seed, "channel")),
      scanner_(config_.orbit, config_.station, 0) {
  config_.validate();
  config_.payload.config_hash = config_hash(config_);
  thermal_ = env::ThermalState::at_equilibrium(env::ambient_temperature(0.0, config_.ambient, config_.orbit));
}

void Mission::log(std::int64_t epoch, std::string type, json data) {
  events_.push_back({epoch, std::move(type), std::move(data)});
}

void Mission::check_command(const Command& c) const {
  if (c.id.empty()) throw Error("malformed_command", "command id must not be empty");
  if (command_ids_.contains(c.id)) throw Error("duplicate_command", "duplicate command id '" + c.id + "'");
  if (c.type == CommandType::run_profile && !profiles_.contains(c.profile_id))
    throw Error("unknown_profile", "unknown profile " + payload::format_profile_id(c.profile_id));
  if (c.type == CommandType::set_parameter && !known_parameter(c.key))
    throw Error("malformed_command", "unknown parameter '" + c.key + "'");
}

void Mission::submit(Command command) {
  check_command(command);
  command_ids_[command.id] = true;
  if (command.submit_epoch <= epoch_) {
    command.submit_epoch = epoch_;
    log(epoch_, "command_queued", {{"id", command.id}});
    ground_queue_.push_back(std::move(command));
  } else {
    const auto pos = std::upper_bound(scheduled_.begin(), scheduled_.end(), command.submit_epoch,
                                      [](std::int64_t t, const Command& c) { return t < c.submit_epoch; });
    scheduled_.insert(pos, std::move(command));
  }
  ++version_;
}

void Mission::ensure_passes(std::int64_t horizon) {
  while (scanner_.cursor() < horizon) {
    for (const auto& p : scanner_.scan_until(scanner_.cursor() + kDay)) passes_.push_back(p);
  }
}

std::vector<env::Pass> Mission::upcoming_passes(std::size_t count) {
  std::vector<env::Pass> out;
  if (!env::station_in_coverage(config_.orbit, config_.station)) return out;
  std::int64_t horizon = epoch_ + static_cast<std::int64_t>(config_.cadence.pass_lookahead_days) * kDay;
  while (true) {
    ensure_passes(horizon);
    out.clear();
    for (const auto& p : passes_)
      if (p.los_epoch > epoch_) {
        out.push_back(p);
        if (out.size() == count) return out;
      }
    if (horizon > epoch_ + 60 * kDay) return out;
    horizon += kDay;
  }
}

payload::Phase Mission::current_phase() const {
  if (!running_) return payload::Phase::idle;
  const auto& trace = running_->result.trace;
  const auto i = static_cast<std::size_t>(epoch_ - running_->result.start_epoch);
  if (i < trace.size()) return trace[i].phase;
  return payload::Phase::idle;
}

env::ThermalState Mission::thermal() const {
  if (!running_) return thermal_;
  const auto& r = running_->result;
  const auto elapsed = epoch_ - r.start_epoch;
  if (elapsed <= 0 || r.trace.empty()) return thermal_;
  const auto& s = r.trace[std::min<std::size_t>(static_cast<std::size_t>(elapsed - 1), r.trace.size() - 1)];
  env::ThermalState out = thermal_;
  out.payload_c = out.t1_c = s.t1_c;
  out.t2_c = s.t2_c;
  out.ambient_c = s.ambient_c;
  out.heater_on = s.heater_on;
  return out;
}

void Mission::dispatch_ground_queue() {
  while (!ground_queue_.empty()) {
    auto c = std::move(ground_queue_.front());
    ground_queue_.pop_front();
    log(epoch_, "command_dispatched", {{"id", c.id}});
    onboard_queue_.push_back(std::move(c));
  }
}

void Mission::apply_parameter(const Command& c) {
  if (c.key == "bias_mv") config_.detectors.bias_mv = c.value;
  else if (c.key == "fixed_angle_deg") config_.payload.fixed_angle_deg = c.value;
  else if (c.key == "thermostat_hold") config_.payload.thermostat_hold = c.value != 0.0;
  log(epoch_, "parameter_set", {{"id", c.id}, {"key", c.key}, {"value", c.value}});
}

void Mission::execute_onboard() {
  for (auto it = onboard_queue_.begin(); it != onboard_queue_.end();) {
    if (it->execute_epoch && *it->execute_epoch > epoch_) {
      ++it;
      continue;
    }
    const Command c = *it;
    it = onboard_queue_.erase(it);
    if (c.type == CommandType::set_parameter) {
      apply_parameter(c);
      continue;
    }
    const auto& profile = profiles_.at(c.profile_id);
    if (busy()) {
      log(epoch_, "command_rejected", {{"id", c.id}, {"reason", "busy"}});
      continue;
    }
    if (!env::power_available(profile, config_.power, false)) {
      log(epoch_, "command_rejected", {{"id", c.id}, {"reason", "power"}});
      continue;
    }
    start_profile(c);
  }
}

void Mission::start_profile(const Command& command) {
  const auto& profile = profiles_.at(command.profile_id);
  payload::Environment environment;
  environment.ambient_c = [this](std::int64_t t) {
    return env::ambient_temperature(static_cast<double>(t), config_.ambient, config_.orbit);
  };
  environment.elapsed_days = [](std::int64_t t) { return static_cast<double>(t) / kDay; };
  environment.thermal = config_.thermal;

  RunningProfile run;
  run.profile = profile;
  run.command_id = command.id;
  run.result = payload::execute_profile(profile, epoch_, thermal_, environment, config_.source, config_.detectors,
                                        config_.payload, config_.power, counts_rng_, modehop_rng_);
  log(epoch_, "profile_started",
      {{"id", command.id}, {"profile_id", payload::format_profile_id(profile.id)}});
  running_ = std::move(run);
  running_event_cursor_ = 0;
}

void Mission::complete_profile() {
  auto& r = running_->result;
  thermal_ = r.final_thermal;
  if (slot_ && slot_->downlink && !slot_->downlink->complete()) {
    log(epoch_, "slot_overwritten", {{"file_id", slot_->file_id}});
    sessions_[slot_->file_id] = slot_->downlink->session();
  }
  StoredFile stored;
  stored.file_id = next_file_id_++;
  stored.profile_id = running_->profile.id;
  stored.ready_epoch = epoch_;
  stored.image = payload::encode_file(r.file);
  stored.downlink = std::make_unique<link::Downlink>(
      link::frame_file(stored.image, stored.file_id), config_.link.bit_error_rate,
      [](std::span<const std::uint8_t> image) {
        try {
          payload::decode_file(image);
          return true;
        } catch (const Error&) {
          return false;
        }
      });
  log(epoch_, "profile_complete",
      {{"id", running_->command_id},
       {"profile_id", payload::format_profile_id(running_->profile.id)},
       {"file_id", stored.file_id},
       {"runs", r.file.runs.size()},
       {"dark_records", r.file.dark_records.size()},
       {"energy_wh", r.energy_wh}});
  slot_ = std::move(stored);
  sessions_[slot_->file_id] = slot_->downlink->session();
  running_.reset();
}

void Mission::archive_slot() {
  ArchivedFile a;
  a.file_id = slot_->file_id;
  a.image = slot_->downlink->file();
  a.file = payload::decode_file(a.image);
  a.session = slot_->downlink->session();
  a.analysis = analysis::analyze_file(a.file_id, a.file, config_.analysis);
  json data{{"file_id", a.file_id}, {"on_air_s", a.session.on_air_s()}, {"frames_sent", a.session.frames_sent}};
  log(epoch_, "file_received", data);
  if (a.analysis.fit) {
    log(epoch_, "file_analyzed",
        {{"file_id", a.file_id}, {"visibility", a.analysis.fit->visibility},
         {"sigma_visibility", a.analysis.fit->sigma_visibility}});
  }
  sessions_[a.file_id] = a.session;
  archive_.emplace(a.file_id, std::move(a));
  slot_.reset();
}

void Mission::transmit() {
  if (!slot_ || !current_pass_ || !slot_->downlink || slot_->downlink->complete()) return;
  std::vector<link::LinkEvent> link_events;
  const double now = static_cast<double>(epoch_);
  slot_->downlink->transmit(now, now + 1.0, static_cast<double>(current_pass_->los_epoch), channel_rng_,
                            &link_events);
  for (const auto& e : link_events) {
    json data{{"file_id", slot_->file_id}};
    if (e.kind == "frame_lost") {
      data["seq"] = e.seq;
      data["reason"] = e.detail;
    } else if (!e.detail.empty()) {
      data["detail"] = e.detail;
    }
    log(epoch_, e.kind, data);
  }
  sessions_[slot_->file_id] = slot_->downlink->session();
  if (slot_->downlink->complete()) archive_slot();
}

void Mission::tick() {
  ensure_passes(epoch_ + static_cast<std::int64_t>(config_.cadence.pass_lookahead_days) * kDay);

  if (running_) {
    const auto& log_in = running_->result.log;
    while (running_event_cursor_ < log_in.size() && log_in[running_event_cursor_].epoch <= epoch_) {
      const auto& e = log_in[running_event_cursor_++];
      log(e.epoch, e.kind, {{"detail", e.detail}});
    }
    if (epoch_ >= running_->result.end_epoch) complete_profile();
  }

  while (!scheduled_.empty() && scheduled_.front().submit_epoch <= epoch_) {
    log(epoch_, "command_queued", {{"id", scheduled_.front().id}});
    ground_queue_.push_back(std::move(scheduled_.front()));
    scheduled_.erase(scheduled_.begin());
  }

  if (current_pass_ && epoch_ >= current_pass_->los_epoch) {
    log(epoch_, "los", {{"aos", current_pass_->aos_epoch}});
    current_pass_.reset();
  }
  while (!passes_.empty() && passes_.front().los_epoch <= epoch_) passes_.pop_front();
  if (!current_pass_ && !passes_.empty() && passes_.front().aos_epoch <= epoch_) {
    current_pass_ = passes_.front();
    passes_.pop_front();
    log(epoch_, "aos", {{"los", current_pass_->los_epoch}, {"max_elevation_deg", current_pass_->max_elevation_deg}});
  }

  if (current_pass_) dispatch_ground_queue();
  execute_onboard();
  transmit();

  if (!running_) {
    const double ambient = env::ambient_temperature(static_cast<double>(epoch_), config_.ambient, config_.orbit);
    thermal_ = env::step_thermal(thermal_, 1.0, false, ambient, config_.thermal);
  }
  ++epoch_;
  ++version_;
}

void Mission::advance(std::int64_t seconds) {
  for (std::int64_t i = 0; i < seconds; ++i) tick();
}

void Mission::run_until(std::int64_t epoch) {
  while (epoch_ < epoch) tick();
}

analysis::CampaignReport Mission::report() const {
  std::vector<analysis::FileAnalysis> files;
  for (const auto& [id, a] : archive_) files.push_back(a.analysis);
  return analysis::build_report(std::move(files), config_.analysis);
}

json Mission::state_json() const {
  const auto th = thermal();
  json state{{"version", version_},
             {"epoch", epoch_},
             {"elapsed_days", static_cast<double>(epoch_) / kDay},
             {"thermal",
              {{"ambient_c", th.ambient_c}, {"payload_c", th.payload_c}, {"t1_c", th.t1_c}, {"t2_c", th.t2_c},
               {"heater_on", th.heater_on}}},
             {"phase", std::string(payload::to_string(current_phase()))},
             {"seed", config_.seed}};
  state["running_profile"] =
      running_ ? json{{"profile_id", payload::format_profile_id(running_->profile.id)},
                      {"command_id", running_->command_id},
                      {"start_epoch", running_->result.start_epoch},
                      {"end_epoch", running_->result.end_epoch}}
               : json(nullptr);
  json ground = json::array(), onboard = json::array();
  for (const auto& c : scheduled_) ground.push_back(to_json(c));
  for (const auto& c : ground_queue_) ground.push_back(to_json(c));
  for (const auto& c : onboard_queue_) onboard.push_back(to_json(c));
  state["ground_queue"] = ground;
  state["onboard_queue"] = onboard;
  if (slot_) {
    state["slot"] = {{"file_id", slot_->file_id},
                     {"profile_id", payload::format_profile_id(slot_->profile_id)},
                     {"ready_epoch", slot_->ready_epoch},
                     {"downlink_fraction", slot_->downlink ? slot_->downlink->completion_fraction() : 0.0}};
  } else {
    state["slot"] = nullptr;
  }
  state["in_pass"] = current_pass_.has_value();
  state["archived_files"] = archive_.size();
  return state;
}

std::unique_ptr<Mission> run_campaign(const MissionConfig& config, double duration_days,
                                      const std::vector<Command>& schedule) {
  auto mission = std::make_unique<Mission>(config);
  for (const auto& c : schedule) mission->submit(c);
  mission->run_until(static_cast<std::int64_t>(std::llround(duration_days * kDay)));
  return mission;
}

}  // namespace pairsat::mission
