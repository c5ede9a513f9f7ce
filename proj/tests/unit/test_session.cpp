#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "softorgan/error.hpp"
#include "softorgan/session.hpp"
#include "softorgan/synth.hpp"
#include "test_support.hpp"

namespace softorgan {
namespace {

struct Scene {
  TriMesh mesh;
  Lattice lattice;
};

// 2 x 1 x 1 box: region 0 ("valve", pinned) on the right, region 1 driven.
Scene two_region_scene() {
  Scene s;
  s.mesh = synth::subdivided_box(Vec3::Zero(), Vec3(2, 1, 1), 4);
  const auto grid = voxelize(s.mesh, 4);
  RegionSpec spec;
  RegionRule valve;
  valve.name = "valve";
  valve.pinned = true;
  valve.box = std::array<Vec3, 2>{Vec3(1.5, 0, 0), Vec3(2, 1, 1)};
  spec.rules = {valve};
  spec.fallback.actuation.harmonics = {{0.1, 1.0, 0.0}};
  s.lattice = build_lattice(grid, assign_regions(grid, spec).regions, Material{});
  return s;
}

SessionConfig session_config() {
  SessionConfig cfg;
  cfg.sim.substeps = 2;
  cfg.stream_decimation = 4;
  return cfg;
}

Session make_session() {
  auto s = two_region_scene();
  return Session(s.mesh, s.lattice, session_config());
}

// Collects every message sent to a sink.
struct Inbox {
  std::vector<wire::ServerMessage> messages;
  Session::ServerSink sink() {
    return [this](const wire::ServerMessage& m) { messages.push_back(m); };
  }
  template <class T>
  std::vector<T> all() const {
    std::vector<T> out;
    for (const auto& m : messages) {
      if (const auto* t = std::get_if<T>(&m)) out.push_back(*t);
    }
    return out;
  }
};

wire::Snapshot snapshot(Session& session) {
  Inbox inbox;
  session.submit(wire::SnapshotRequest{}, inbox.sink());
  session.process_commands();
  const auto snaps = inbox.all<wire::Snapshot>();
  EXPECT_EQ(snaps.size(), 1u);
  return snaps.empty() ? wire::Snapshot{} : snaps.front();
}

TEST(Session, RejectsBadConfiguration) {
  auto s = two_region_scene();
  auto cfg = session_config();
  cfg.stream_decimation = 0;
  EXPECT_THROW(Session(s.mesh, s.lattice, cfg), PreconditionError);
  cfg = session_config();
  cfg.sim.dt = 0.1;
  cfg.sim.substeps = 1;
  EXPECT_THROW(Session(s.mesh, s.lattice, cfg), InstabilityRisk);
}

TEST(Session, HelloCarriesMeshBindingAndRegions) {
  auto s = two_region_scene();
  Session session(s.mesh, s.lattice, session_config());
  const auto h = session.hello();
  EXPECT_EQ(h.mesh.vertices, s.mesh.vertices);
  EXPECT_EQ(h.binding.vertices.size(), s.mesh.vertices.size());
  ASSERT_EQ(h.regions.size(), 2u);
  EXPECT_EQ(h.regions[0].name, "valve");
  EXPECT_TRUE(h.regions[0].pinned);
  EXPECT_EQ(h.regions[0].amplitude_scale, 0.0);
}

TEST(Session, FramesFollowDecimation) {
  auto session = make_session();
  Inbox inbox;
  session.subscribe(inbox.sink());
  session.advance(20);
  const auto frames = inbox.all<wire::Frame>();
  ASSERT_EQ(frames.size(), 5u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i].step, 4 * (i + 1));
    EXPECT_NEAR(frames[i].t, frames[i].step * session.config().sim.dt, 1e-12);
    EXPECT_EQ(frames[i].positions.size(), session.state().lattice.particles.size());
  }
  EXPECT_EQ(session.step_count(), 20u);
}

TEST(Session, TwoSubscribersSeeIdenticalFrames) {
  auto session = make_session();
  Inbox a;
  Inbox b;
  session.subscribe(a.sink());
  session.subscribe(b.sink());
  session.advance(12);
  session.submit(wire::Poke{Vec3(0.5, 0.5, 1.0), Vec3(0, 0, -5), 0.3, 0.05}, {});
  session.advance(40);
  const auto fa = a.all<wire::Frame>();
  const auto fb = b.all<wire::Frame>();
  ASSERT_EQ(fa.size(), 13u);
  ASSERT_EQ(fa.size(), fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) {
    EXPECT_EQ(fa[i].step, fb[i].step);
    EXPECT_EQ(fa[i].positions, fb[i].positions);
  }
}

TEST(Session, UnsubscribedSinkStopsReceiving) {
  auto session = make_session();
  Inbox a;
  const int id = session.subscribe(a.sink());
  session.advance(4);
  session.unsubscribe(id);
  session.advance(8);
  EXPECT_EQ(a.all<wire::Frame>().size(), 1u);
}

TEST(Session, PauseFreezesStateExactly) {
  auto session = make_session();
  session.advance(10);
  session.submit(wire::Pause{}, {});
  session.advance(50);
  const auto frozen = session.state().lattice.positions();
  EXPECT_EQ(session.state().step, 10u);
  EXPECT_FALSE(session.running());
  session.advance(100);
  EXPECT_EQ(session.state().lattice.positions(), frozen);
  EXPECT_TRUE(snapshot(session).paused);

  session.submit(wire::Resume{}, {});
  session.advance(30);
  EXPECT_EQ(session.state().step, 40u);

  // The interrupted run is bitwise identical to a straight one.
  auto straight = make_session();
  straight.advance(40);
  EXPECT_EQ(straight.state().lattice.positions(), session.state().lattice.positions());
}

TEST(Session, SetParamsIsVisibleInSnapshotAndHello) {
  auto session = make_session();
  session.advance(25);
  Inbox replies;
  const ActuationSignal next{{{0.2, 2.0, 0.0}}};
  session.submit(wire::SetParams{1, next, 0.5}, replies.sink());
  const auto snap = snapshot(session);
  EXPECT_TRUE(replies.messages.empty());
  ASSERT_EQ(snap.regions.size(), 2u);
  ASSERT_EQ(snap.regions[1].actuation.harmonics.size(), 1u);
  EXPECT_EQ(snap.regions[1].actuation.harmonics[0].amplitude, 0.2);
  EXPECT_EQ(snap.regions[1].actuation.harmonics[0].frequency, 2.0);
  EXPECT_EQ(snap.regions[1].amplitude_scale, 0.5);
  EXPECT_EQ(snap.step, 25u);
  EXPECT_EQ(session.hello().regions[1], snap.regions[1]);
}

TEST(Session, SetParamsKeepsTheRestSignalContinuous) {
  auto session = make_session();
  session.advance(37);
  const double t = session.state().time;
  const auto& before = session.state().lattice.regions[1];
  const double value = before.amplitude_scale * before.actuation.value(t);
  session.submit(wire::SetParams{1, ActuationSignal{{{0.3, 1.7, 2.0}}}, 1.0}, {});
  session.process_commands();
  const auto& after = session.state().lattice.regions[1];
  EXPECT_NEAR(after.amplitude_scale * after.actuation.value(t), value, 1e-9);
}

TEST(Session, PinnedAndUnknownRegionsAreRejected) {
  auto session = make_session();
  Inbox replies;
  session.submit(wire::SetParams{0, ActuationSignal{{{0.1, 1.0, 0.0}}}, 1.0}, replies.sink());
  session.submit(wire::SetParams{5, ActuationSignal{}, {}}, replies.sink());
  session.submit(wire::SetParams{-1, ActuationSignal{}, {}}, replies.sink());
  session.submit(wire::SetParams{1, ActuationSignal{{{0.6, 1.0, 0.0}, {0.6, 2.0, 0.0}}}, {}},
                 replies.sink());
  session.process_commands();
  EXPECT_EQ(replies.all<wire::Error>().size(), 4u);
  EXPECT_TRUE(session.state().lattice.regions[0].actuation.harmonics.empty());
  // Pinned regions may still take a signal as long as it stays muted.
  session.submit(wire::SetParams{0, ActuationSignal{{{0.1, 1.0, 0.0}}}, {}}, replies.sink());
  session.process_commands();
  EXPECT_EQ(replies.all<wire::Error>().size(), 4u);
}

TEST(Session, PokeDeviatesFromAPokelessRun) {
  auto poked = make_session();
  auto plain = make_session();
  poked.advance(10);
  plain.advance(10);
  poked.submit(wire::Poke{Vec3(0.25, 0.5, 1.0), Vec3(0, 0, -2), 0.5, 0.1}, {});
  poked.advance(24);
  plain.advance(24);
  double deviation = 0.0;
  const auto a = poked.state().lattice.positions();
  const auto b = plain.state().lattice.positions();
  for (std::size_t p = 0; p < a.size(); ++p) deviation = std::max(deviation, (a[p] - b[p]).norm());
  EXPECT_GT(deviation, 1e-4);
  // Pinned particles ignore the push.
  for (std::size_t p = 0; p < a.size(); ++p) {
    if (poked.state().lattice.is_pinned(p)) EXPECT_EQ(a[p], b[p]);
  }
}

TEST(Session, InvalidPokeGetsAnError) {
  auto session = make_session();
  Inbox replies;
  session.submit(wire::Poke{Vec3::Zero(), Vec3(0, 0, 1), 0.0, 1.0}, replies.sink());
  session.process_commands();
  EXPECT_EQ(replies.all<wire::Error>().size(), 1u);
}

TEST(Session, ResetRestoresRestPoseAndKeepsParams) {
  auto session = make_session();
  const auto rest = session.state().lattice.positions();
  session.submit(wire::SetParams{1, ActuationSignal{{{0.2, 2.0, 0.0}}}, {}}, {});
  session.advance(60);
  EXPECT_NE(session.state().lattice.positions(), rest);
  session.submit(wire::Reset{}, {});
  session.process_commands();
  EXPECT_EQ(session.state().step, 0u);
  EXPECT_EQ(session.state().time, 0.0);
  EXPECT_EQ(session.step_count(), 0u);
  EXPECT_EQ(session.state().lattice.positions(), rest);
  EXPECT_EQ(session.state().lattice.regions[1].actuation.harmonics[0].frequency, 2.0);
}

TEST(Session, BlowUpHaltsAndBroadcastsAnError) {
  auto s = two_region_scene();
  auto cfg = session_config();
  cfg.sim.gravity = Vec3(0, 0, -1e9);
  Session session(s.mesh, s.lattice, cfg);
  Inbox inbox;
  session.subscribe(inbox.sink());
  session.advance(1000);
  EXPECT_FALSE(session.running());
  EXPECT_EQ(inbox.all<wire::Error>().size(), 1u);
  const auto halted_at = session.state().step;
  session.submit(wire::Resume{}, {});
  session.advance(10);
  EXPECT_EQ(session.state().step, halted_at);
}

TEST(PhaseContinuous, ReachableValuesAreMatchedExactly) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const ActuationSignal cur{{{0.05 + 0.1 * u(rng), 0.5 + u(rng), 6.0 * u(rng)}}};
    // The new amplitude is larger, so every current value is reachable.
    const ActuationSignal next{{{0.2 + 0.1 * u(rng), 0.5 + 2.0 * u(rng), 6.0 * u(rng)}}};
    const double t = 10.0 * u(rng);
    const auto out = phase_continuous(cur, 1.0, next, 1.0, t);
    ASSERT_NEAR(out.value(t), cur.value(t), 1e-9) << trial;
    EXPECT_EQ(out.harmonics[0].amplitude, next.harmonics[0].amplitude);
    EXPECT_EQ(out.harmonics[0].frequency, next.harmonics[0].frequency);
    // Slope sign is kept where the current signal is moving.
    if (std::abs(cur.derivative(t)) > 1e-6) {
      EXPECT_EQ(out.derivative(t) > 0.0, cur.derivative(t) > 0.0) << trial;
    }
  }
}

TEST(PhaseContinuous, UnreachableValueUsesTheClosestPeak) {
  const ActuationSignal cur{{{0.3, 1.0, 0.0}}};
  const ActuationSignal next{{{0.1, 1.0, 0.0}}};
  // At t = 0.25 the current signal sits at its 0.3 peak; 0.1 is the best match.
  const auto out = phase_continuous(cur, 1.0, next, 1.0, 0.25);
  EXPECT_NEAR(out.value(0.25), 0.1, 1e-9);
}

TEST(PhaseContinuous, MutedTargetsPassThrough) {
  const ActuationSignal cur{{{0.3, 1.0, 0.0}}};
  const ActuationSignal next{{{0.1, 2.0, 1.0}}};
  EXPECT_EQ(phase_continuous(cur, 1.0, next, 0.0, 0.4), next);
  EXPECT_EQ(phase_continuous(cur, 1.0, ActuationSignal{}, 1.0, 0.4), ActuationSignal{});
}

}  // namespace
}  // namespace softorgan
