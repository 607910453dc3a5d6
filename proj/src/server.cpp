#include "pairsat/server.hpp"

#include <chrono>
#include <cmath>

#include <httplib.h>

#include "pairsat/archive.hpp"
#include "pairsat/error.hpp"

namespace pairsat::server {

using nlohmann::json;

namespace {

constexpr auto kClockTick = std::chrono::milliseconds(100);

int status_for(const std::string& code) {
  if (code == "busy" || code == "duplicate_command") return 409;
  if (code == "not_found" || code == "empty_archive") return 404;
  return 422;
}

void reply(httplib::Response& res, int status, json body, std::uint64_t version) {
  if (body.is_object()) body["version"] = version;
  else body = json{{"data", std::move(body)}, {"version", version}};
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                 std::uint64_t version) {
  reply(res, status, json{{"error", code}, {"message", message}}, version);
}

std::optional<std::uint16_t> parse_file_id(const std::string& text) {
  if (text.empty() || text.size() > 5) return std::nullopt;
  for (char c : text)
    if (c < '0' || c > '9') return std::nullopt;
  const auto v = std::stoul(text);
  if (v > 0xFFFF) return std::nullopt;
  return static_cast<std::uint16_t>(v);
}

}  // namespace

OpsServer::OpsServer(MissionConfig config)
    : mission_(std::move(config)), clock_rate_(mission_.config().cadence.api_clock_rate),
      http_(std::make_unique<httplib::Server>()) {
  install_routes();
  clock_thread_ = std::thread([this] { clock_loop(); });
}

OpsServer::~OpsServer() {
  stop();
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  clock_cv_.notify_all();
  if (clock_thread_.joinable()) clock_thread_.join();
}

void OpsServer::set_clock_rate(double rate) {
  std::lock_guard lock(mutex_);
  clock_rate_ = rate;
  clock_debt_ = 0.0;
}

void OpsServer::clock_loop() {
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    clock_cv_.wait_for(lock, kClockTick);
    if (stopping_ || clock_rate_ <= 0.0) continue;
    clock_debt_ += clock_rate_ * std::chrono::duration<double>(kClockTick).count();
    const auto whole = static_cast<std::int64_t>(std::floor(clock_debt_));
    if (whole > 0) {
      clock_debt_ -= static_cast<double>(whole);
      mission_.advance(whole);
    }
  }
}

int OpsServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("bind_failed", "cannot bind " + host + ":" + std::to_string(port));
  listen_thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return bound;
}

void OpsServer::listen(const std::string& host, int port) {
  if (!http_->listen(host, port)) throw Error("bind_failed", "cannot listen on " + host + ":" + std::to_string(port));
}

void OpsServer::stop() {
  if (http_) http_->stop();
  if (listen_thread_.joinable()) listen_thread_.join();
}

void OpsServer::install_routes() {
  auto& s = *http_;

  s.Get("/state", [this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    auto state = mission_.state_json();
    state["clock_rate"] = clock_rate_;
    reply(res, 200, state, mission_.version());
  });

  s.Get("/passes", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    long n = 5;
    if (req.has_param("n")) {
      try {
        n = std::stol(req.get_param_value("n"));
      } catch (const std::exception&) {
        n = -1;
      }
      if (n < 0 || n > 1000) return reply_error(res, 422, "invalid_argument", "n must be 0..1000", mission_.version());
    }
    json passes = json::array();
    for (const auto& p : mission_.upcoming_passes(static_cast<std::size_t>(n))) passes.push_back(archive::to_json(p));
    reply(res, 200, json{{"epoch", mission_.epoch()}, {"passes", passes}}, mission_.version());
  });

  s.Get("/profiles", [this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    json profiles = json::array();
    for (const auto& [id, p] : payload::default_profiles()) profiles.push_back(archive::to_json(p));
    reply(res, 200, json{{"profiles", profiles}}, mission_.version());
  });

  s.Post("/commands", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    try {
      const auto body = json::parse(req.body);
      auto command = mission::parse_command(body, mission_.epoch());
      if (command.id.empty()) command.id = "api-" + std::to_string(++api_command_counter_);
      if (command.type == mission::CommandType::run_profile && mission_.busy())
        throw Error("busy", "a profile is already running");
      const auto submitted = command;
      mission_.submit(std::move(command));
      reply(res, 202, json{{"accepted", mission::to_json(submitted)}}, mission_.version());
    } catch (const json::exception& e) {
      reply_error(res, 422, "malformed_command", e.what(), mission_.version());
    } catch (const Error& e) {
      reply_error(res, status_for(e.code()), e.code(), e.what(), mission_.version());
    }
  });

  s.Post("/clock", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return reply_error(res, 422, "malformed_request", e.what(), mission_.version());
    }
    if (!body.is_object() || (!body.contains("rate") && !body.contains("step_seconds")))
      return reply_error(res, 422, "malformed_request", "expected rate or step_seconds", mission_.version());
    if (body.contains("rate")) {
      if (!body["rate"].is_number() || body["rate"].get<double>() < 0)
        return reply_error(res, 422, "malformed_request", "rate must be a nonnegative number", mission_.version());
      clock_rate_ = body["rate"].get<double>();
      clock_debt_ = 0.0;
    }
    if (body.contains("step_seconds")) {
      const auto& st = body["step_seconds"];
      if (!st.is_number() || st.get<double>() < 0 || st.get<double>() > 400.0 * 86400)
        return reply_error(res, 422, "malformed_request", "step_seconds must be 0..34560000", mission_.version());
      mission_.advance(static_cast<std::int64_t>(std::llround(st.get<double>())));
    }
    reply(res, 200, json{{"epoch", mission_.epoch()}, {"rate", clock_rate_}}, mission_.version());
  });

  s.Get("/files", [this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    json files = json::array();
    for (const auto& [id, a] : mission_.archive()) {
      files.push_back({{"file_id", id},
                       {"profile_id", payload::format_profile_id(a.file.header.profile_id)},
                       {"start_epoch_s", a.file.header.start_epoch_s},
                       {"dark_records", a.file.dark_records.size()},
                       {"runs", a.file.runs.size()},
                       {"received_at", a.session.completed_at},
                       {"visibility", a.analysis.fit ? json(a.analysis.fit->visibility) : json(nullptr)}});
    }
    reply(res, 200, json{{"files", files}}, mission_.version());
  });

  s.Get(R"(/files/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    const auto id = parse_file_id(req.matches[1]);
    const auto it = id ? mission_.archive().find(*id) : mission_.archive().end();
    if (it == mission_.archive().end())
      return reply_error(res, 404, "not_found", "no such file", mission_.version());
    res.status = 200;
    res.set_header("X-State-Version", std::to_string(mission_.version()));
    res.set_content(std::string(it->second.image.begin(), it->second.image.end()), "application/octet-stream");
  });

  s.Get(R"(/files/([^/]+)/analysis)", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    const auto id = parse_file_id(req.matches[1]);
    const auto it = id ? mission_.archive().find(*id) : mission_.archive().end();
    if (it == mission_.archive().end())
      return reply_error(res, 404, "not_found", "no such file", mission_.version());
    reply(res, 200, archive::to_json(it->second.analysis), mission_.version());
  });

  s.Get("/report", [this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    try {
      reply(res, 200, archive::to_json(mission_.report()), mission_.version());
    } catch (const Error& e) {
      reply_error(res, status_for(e.code()), e.code(), e.what(), mission_.version());
    }
  });
}

}  // namespace pairsat::server
