#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "pairsat/mission.hpp"

namespace httplib {
class Server;
}

namespace pairsat::server {

/// HTTP/JSON operations API over one Mission. Every handler takes the same
/// lock, and every response carries the mission's state version.
class OpsServer {
 public:
  explicit OpsServer(MissionConfig config);
  ~OpsServer();

  OpsServer(const OpsServer&) = delete;
  OpsServer& operator=(const OpsServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws Error("bind_failed").
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  /// Simulated seconds per wall-clock second; 0 pauses.
  void set_clock_rate(double rate);

 private:
  void install_routes();
  void clock_loop();

  std::mutex mutex_;
  mission::Mission mission_;
  double clock_rate_ = 0.0;
  double clock_debt_ = 0.0;
  std::uint64_t api_command_counter_ = 0;

  std::unique_ptr<httplib::Server> http_;
  std::thread listen_thread_;
  std::thread clock_thread_;
  std::condition_variable clock_cv_;
  bool stopping_ = false;
};

}  // namespace pairsat::server
