#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "hitl/session.hpp"

namespace hitl {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::filesystem::path artifact_root;
  int max_live_sessions = 1;
};

// HTTP endpoints plus a WebSocket event channel per session, served from one
// I/O thread. Routes:
//
//   POST /api/sessions                       create ({"config":..,"options":..} or a bare config)
//   GET  /api/sessions                       list ids
//   GET  /api/sessions/{id}                  state
//   POST /api/sessions/{id}/{start|pause|resume|abort}
//   POST /api/sessions/{id}/speed            {"throttle_ms":N}
//   POST /api/sessions/{id}/feedback         {"accepted":bool,"human_reward":number|null}
//   GET  /api/sessions/{id}/artifacts/{file}
//   GET  /api/sessions/{id}/stream[?from_seq=N]   WebSocket upgrade
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const noexcept;
  SessionManager& sessions() noexcept;

  // Blocks until stop() is called from another thread or a signal handler.
  void run();
  void start_background();
  void stop();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

// Applies one client command frame (start_training, feedback, control) and
// returns the reply frame. Never throws.
std::string handle_command(SessionManager& sessions, const std::string& id, std::string_view frame);

}  // namespace hitl
