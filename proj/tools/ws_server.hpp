#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "softorgan/session.hpp"

namespace softorgan::service {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;        // 0 picks a free port
  std::filesystem::path static_dir;  // empty: plain HTTP requests get 404
  int max_catchup_steps = 8;         // per tick; beyond that wall time is dropped
  std::size_t max_queued_frames = 32;
};

// WebSocket front end for one Session. Owns the simulation loop thread,
// which paces Session::advance against the wall clock with a fixed dt.
class Server {
 public:
  Server(Session& session, ServerOptions opts);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds, then starts the network and simulation threads. Throws IoError
  // when the address cannot be bound.
  void start();
  void stop();
  unsigned short port() const;

  std::size_t dropped_frames() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace softorgan::service
