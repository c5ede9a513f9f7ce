#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include "softorgan/dynamics.hpp"
#include "softorgan/lattice.hpp"
#include "softorgan/wire.hpp"

namespace softorgan {

struct SessionConfig {
  SimConfig sim;
  int stream_decimation = 4;  // broadcast every Nth step
};

// Re-anchors the phases of `next` so that scale * next(t) continues
// current_scale * current(t) at time t. Continuity is exact when the value is
// reachable by the new signal, otherwise the closest reachable value is used.
ActuationSignal phase_continuous(const ActuationSignal& current, double current_scale,
                                 const ActuationSignal& next, double next_scale, double t);

// One live simulation. Network threads call submit/subscribe/hello; exactly
// one loop thread calls advance/process_commands and owns the SimState.
class Session {
 public:
  using ServerSink = std::function<void(const wire::ServerMessage&)>;

  Session(TriMesh mesh, Lattice lattice, SessionConfig cfg);

  // Thread-safe.
  void submit(wire::ClientMessage msg, ServerSink reply);
  int subscribe(ServerSink sink);
  void unsubscribe(int id);
  void broadcast(const wire::ServerMessage& msg);
  wire::Hello hello() const;
  bool running() const;
  std::uint64_t step_count() const;

  // Loop thread only. Commands are applied before each step in arrival
  // order; steps are skipped while paused or halted.
  void process_commands();
  void advance(std::size_t steps);

  const SimState& state() const { return state_; }
  const SessionConfig& config() const { return cfg_; }
  const SkinBinding& binding() const { return binding_; }

 private:
  struct Pending {
    wire::ClientMessage msg;
    ServerSink reply;
  };

  void apply(const wire::ClientMessage& msg, const ServerSink& reply);
  void publish_regions();
  wire::Frame frame() const;

  TriMesh mesh_;
  SkinBinding binding_;
  Lattice rest_pose_;
  SessionConfig cfg_;
  RestLengthFn rest_;
  SimState state_;

  mutable std::mutex mu_;
  std::deque<Pending> queue_;
  std::map<int, ServerSink> subscribers_;
  int next_subscriber_ = 0;
  std::vector<wire::RegionInfo> regions_;  // mirror of live params for hello()
  bool running_ = true;
  std::uint64_t steps_ = 0;
};

}  // namespace softorgan
