#include "softorgan/session.hpp"

#include <cmath>
#include <numbers>
#include <tuple>

#include "softorgan/error.hpp"

namespace softorgan {

namespace {

constexpr int kPhaseGrid = 720;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

ActuationSignal phase_continuous(const ActuationSignal& current, double current_scale,
                                 const ActuationSignal& next, double next_scale, double t) {
  if (next.harmonics.empty() || next_scale == 0.0) return next;
  const double target = current_scale * current.value(t);
  const double target_slope = current_scale * current.derivative(t);
  auto g = [&](double tau) { return next_scale * next.value(tau) - target; };

  // Search one period of the slowest harmonic for the time tau at which the
  // new signal takes the current value, preferring a matching slope sign.
  const double period = 1.0 / next.harmonics.front().frequency;
  const double step = period / kPhaseGrid;
  const double tol = 1e-12 * (1.0 + std::abs(target));
  // Ranking: exact hits first, then slope agreement, then distance.
  auto rank = [&](double tau) {
    const double cost = std::abs(g(tau));
    const double slope = next_scale * next.derivative(tau);
    const bool slope_ok = target_slope == 0.0 || (slope > 0.0) == (target_slope > 0.0);
    return std::tuple{cost > tol, !slope_ok, cost};
  };
  double best_tau = 0.0;
  auto best = rank(0.0);
  double prev_tau = 0.0;
  double prev_g = g(0.0);
  for (int i = 1; i <= kPhaseGrid; ++i) {
    const double tau = i * step;
    const double gi = g(tau);
    double cand = tau;
    if ((prev_g <= 0.0) != (gi <= 0.0)) {
      double lo = prev_tau;
      double hi = tau;
      double glo = prev_g;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if ((gm <= 0.0) == (glo <= 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      cand = std::abs(g(lo)) < std::abs(g(hi)) ? lo : hi;
    }
    const auto r = rank(cand);
    if (r < best) {
      best = r;
      best_tau = cand;
    }
    prev_tau = tau;
    prev_g = gi;
  }

  ActuationSignal out = next;
  for (auto& h : out.harmonics) {
    h.phase = wrap_phase(h.phase + 2.0 * std::numbers::pi * h.frequency * (best_tau - t));
  }
  return out;
}

Session::Session(TriMesh mesh, Lattice lattice, SessionConfig cfg)
    : mesh_(std::move(mesh)),
      rest_pose_(std::move(lattice)),
      cfg_(cfg),
      rest_(region_actuation(cfg.sim.rest_clamp_epsilon)) {
  if (cfg_.stream_decimation < 1) throw PreconditionError("stream decimation must be >= 1");
  check_stability(cfg_.sim, rest_pose_);
  binding_ = bind_skin(mesh_, rest_pose_);
  state_.lattice = rest_pose_;
  regions_ = wire::region_infos(rest_pose_.regions);
}

void Session::submit(wire::ClientMessage msg, ServerSink reply) {
  std::lock_guard lock(mu_);
  queue_.push_back({std::move(msg), std::move(reply)});
}

int Session::subscribe(ServerSink sink) {
  std::lock_guard lock(mu_);
  const int id = next_subscriber_++;
  subscribers_.emplace(id, std::move(sink));
  return id;
}

void Session::unsubscribe(int id) {
  std::lock_guard lock(mu_);
  subscribers_.erase(id);
}

void Session::broadcast(const wire::ServerMessage& msg) {
  std::vector<ServerSink> sinks;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, sink] : subscribers_) sinks.push_back(sink);
  }
  for (const auto& sink : sinks) sink(msg);
}

wire::Hello Session::hello() const {
  std::lock_guard lock(mu_);
  return {binding_, mesh_, regions_};
}

bool Session::running() const {
  std::lock_guard lock(mu_);
  return running_;
}

std::uint64_t Session::step_count() const {
  std::lock_guard lock(mu_);
  return steps_;
}

void Session::publish_regions() {
  auto infos = wire::region_infos(state_.lattice.regions);
  std::lock_guard lock(mu_);
  regions_ = std::move(infos);
}

wire::Frame Session::frame() const {
  return {state_.step, state_.time, state_.lattice.positions()};
}

void Session::apply(const wire::ClientMessage& msg, const ServerSink& reply) {
  auto fail = [&](const std::string& what) {
    if (reply) reply(wire::Error{what});
  };
  std::visit(
      Overloaded{
          [&](const wire::SetParams& m) {
            const auto& regions = state_.lattice.regions;
            if (m.region < 0 || static_cast<std::size_t>(m.region) >= regions.size()) {
              return fail("set_params: no region " + std::to_string(m.region));
            }
            if (!m.actuation.is_valid()) return fail("set_params: invalid harmonics");
            auto& live = state_.lattice.regions[static_cast<std::size_t>(m.region)];
            const double scale = m.amplitude_scale.value_or(live.amplitude_scale);
            if (live.pinned && scale != 0.0) {
              return fail("set_params: region " + std::to_string(m.region) +
                          " is pinned; amplitude_scale must stay 0");
            }
            const auto next =
                phase_continuous(live.actuation, live.amplitude_scale, m.actuation, scale,
                                 state_.time);
            live.actuation = next;
            live.amplitude_scale = scale;
            auto& rest = rest_pose_.regions[static_cast<std::size_t>(m.region)];
            rest.actuation = next;
            rest.amplitude_scale = scale;
            publish_regions();
          },
          [&](const wire::Poke& m) {
            if (!(m.radius > 0.0) || !(m.duration > 0.0)) {
              return fail("poke: radius and duration must be > 0");
            }
            apply_poke(state_, m.point, m.force, m.radius, m.duration);
          },
          [&](const wire::Pause&) {
            std::lock_guard lock(mu_);
            running_ = false;
          },
          [&](const wire::Resume&) {
            std::lock_guard lock(mu_);
            running_ = !state_.halted;
          },
          [&](const wire::Reset&) {
            state_ = SimState{};
            state_.lattice = rest_pose_;
            std::lock_guard lock(mu_);
            steps_ = 0;
          },
          [&](const wire::SnapshotRequest&) {
            if (!reply) return;
            wire::Snapshot snap;
            snap.step = state_.step;
            snap.t = state_.time;
            snap.positions = state_.lattice.positions();
            snap.regions = wire::region_infos(state_.lattice.regions);
            snap.paused = !running();
            reply(snap);
          },
      },
      msg);
}

void Session::process_commands() {
  for (;;) {
    Pending next;
    {
      std::lock_guard lock(mu_);
      if (queue_.empty()) return;
      next = std::move(queue_.front());
      queue_.pop_front();
    }
    apply(next.msg, next.reply);
  }
}

void Session::advance(std::size_t steps) {
  process_commands();
  for (std::size_t i = 0; i < steps; ++i) {
    if (!running()) break;
    try {
      step(state_, cfg_.sim, rest_);
    } catch (const InstabilityDetected& e) {
      {
        std::lock_guard lock(mu_);
        running_ = false;
      }
      broadcast(wire::Error{std::string("simulation halted: ") + e.what()});
      break;
    }
    {
      std::lock_guard lock(mu_);
      steps_ = state_.step;
    }
    if (state_.step % static_cast<std::uint64_t>(cfg_.stream_decimation) == 0) {
      broadcast(frame());
    }
    process_commands();
  }
}

}  // namespace softorgan
