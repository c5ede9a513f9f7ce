#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "softorgan/error.hpp"
#include "softorgan/synth.hpp"
#include "softorgan/training.hpp"
#include "test_support.hpp"

namespace softorgan {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> sampled(double rate, std::size_t n, double t0,
                            const std::vector<Harmonic>& hs) {
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) / rate;
    for (const auto& h : hs) x[i] += h.amplitude * std::sin(kTwoPi * h.frequency * t + h.phase);
  }
  return x;
}

Lattice cube_lattice(int resolution) {
  return testing::single_region_lattice(synth::unit_cube(), resolution);
}

TEST(EvalRest, PeakOfUnitSpring) {
  const SpringConstraint c{0, 1, 1.0, 100.0, 0.5, 0};
  const ActuationSignal s{{{0.1, 1.0, 0.0}}};
  EXPECT_NEAR(eval_rest(c, s, 1.0, 0.25), 1.1, 1e-15);
  EXPECT_NEAR(eval_rest(c, s, 1.0, 0.75), 0.9, 1e-15);
  EXPECT_NEAR(eval_rest(c, s, 0.0, 0.25), 1.0, 1e-15);
}

TEST(EvalRest, ClampsToEpsilonBand) {
  const SpringConstraint c{0, 1, 2.0, 100.0, 0.5, 0};
  const ActuationSignal s{{{3.0, 1.0, 0.0}}};
  EXPECT_NEAR(eval_rest(c, s, 1.0, 0.25, 0.1), 2.0 * 1.9, 1e-12);
  EXPECT_NEAR(eval_rest(c, s, 1.0, 0.75, 0.1), 2.0 * 0.1, 1e-12);
}

TEST(FitSignal, RecoversSingleToneExactly) {
  // 600 samples over 5 s put 1.2 Hz on bin 6.
  const auto x = sampled(120.0, 600, 0.0, {{0.08, 1.2, 0.7}});
  const auto fit = fit_signal(x, 120.0, 1);
  ASSERT_EQ(fit.signal.harmonics.size(), 1u);
  const auto& h = fit.signal.harmonics[0];
  EXPECT_NEAR(h.amplitude, 0.08, 1e-12);
  EXPECT_NEAR(h.frequency, 1.2, 1e-12);
  EXPECT_NEAR(h.phase, 0.7, 1e-10);
  EXPECT_LT(fit.residual, 1e-9);
}

TEST(FitSignal, ZeroSeriesGivesEmptySignal) {
  const std::vector<double> x(64, 0.0);
  const auto fit = fit_signal(x, 30.0, 3);
  EXPECT_TRUE(fit.signal.harmonics.empty());
  EXPECT_EQ(fit.residual, 0.0);
}

TEST(FitSignal, TwoTonesWithinFivePercent) {
  const std::vector<Harmonic> truth{{0.1, 1.0, 0.3}, {0.04, 2.0, 2.0}};
  const auto x = sampled(60.0, 240, 0.0, truth);
  const auto fit = fit_signal(x, 60.0, 2);
  ASSERT_EQ(fit.signal.harmonics.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(fit.signal.harmonics[i].amplitude, truth[i].amplitude, 0.05 * truth[i].amplitude);
    EXPECT_NEAR(fit.signal.harmonics[i].frequency, truth[i].frequency, 0.05 * truth[i].frequency);
  }
  EXPECT_LT(fit.residual, 1e-9);
}

TEST(FitSignal, KeepsTheStrongestBins) {
  const auto x = sampled(40.0, 200, 0.0, {{0.01, 1.0, 0.0}, {0.2, 3.0, 0.0}, {0.05, 4.0, 1.0}});
  const auto fit = fit_signal(x, 40.0, 2);
  ASSERT_EQ(fit.signal.harmonics.size(), 2u);
  // Reported in ascending frequency.
  EXPECT_NEAR(fit.signal.harmonics[0].frequency, 3.0, 1e-12);
  EXPECT_NEAR(fit.signal.harmonics[1].frequency, 4.0, 1e-12);
  EXPECT_NEAR(fit.residual, 0.01 / std::sqrt(2.0), 1e-9);
}

TEST(FitSignal, ReconstructsOnBinAlignedRandomSignals) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> amp(0.01, 0.2);
  std::uniform_real_distribution<double> ph(0.0, kTwoPi);
  std::uniform_int_distribution<int> bin(1, 20);
  for (int trial = 0; trial < 30; ++trial) {
    // Two distinct bins of a 4 s window at 50 Hz.
    const int b1 = bin(rng);
    int b2 = bin(rng);
    while (b2 == b1) b2 = bin(rng);
    const auto x = sampled(50.0, 200, 0.0,
                           {{amp(rng), b1 / 4.0, ph(rng)}, {amp(rng), b2 / 4.0, ph(rng)}});
    const auto fit = fit_signal(x, 50.0, 2);
    ASSERT_LT(fit.residual, 1e-9) << trial;
  }
}

TEST(FitSignal, PhaseRefersToAbsoluteTime) {
  const double t0 = 0.55;
  const auto x = sampled(100.0, 400, t0, {{0.1, 1.5, 1.1}});
  const auto fit = fit_signal(x, 100.0, 1, t0);
  ASSERT_EQ(fit.signal.harmonics.size(), 1u);
  EXPECT_NEAR(fit.signal.harmonics[0].phase, 1.1, 1e-9);
  EXPECT_LT(fit.residual, 1e-9);
}

TEST(FitSignal, ArgumentErrors) {
  const std::vector<double> four(4, 1.0);
  EXPECT_THROW(fit_signal(four, 10.0, 2), TooFewSamples);
  const std::vector<double> x(100, 0.0);
  EXPECT_THROW(fit_signal(x, 10.0, 0), PreconditionError);
  EXPECT_THROW(fit_signal(x, 10.0, 5), PreconditionError);
  EXPECT_THROW(fit_signal(x, 0.0, 1), PreconditionError);
}

TEST(DftBin, MatchesDirectSum) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(97);
  for (auto& v : x) v = n(rng);
  for (std::size_t k : {0u, 1u, 5u, 48u}) {
    const auto got = dft_bin(x, k);
    const auto want = testing::oracle::dft(x, k);
    EXPECT_NEAR(got.real(), want.real(), 1e-9);
    EXPECT_NEAR(got.imag(), want.imag(), 1e-9);
  }
}

TEST(CoupleToKeyframes, MissingBindingIsRejected) {
  const auto mesh = synth::unit_cube();
  const auto lat = cube_lattice(2);
  const auto track = synth::breathing_track(mesh, Vec3::Constant(0.5), 0.1, 1.0, 30, 2.0);
  EXPECT_THROW(couple_to_keyframes(lat, track, mesh, nullptr, 1000, 10), MissingBinding);
  const auto other = synth::subdivided_box(Vec3::Zero(), Vec3::Ones(), 2);
  const auto wrong = bind_skin(other, lat);
  EXPECT_THROW(couple_to_keyframes(lat, track, mesh, &wrong, 1000, 10), MissingBinding);
}

TEST(CoupleToKeyframes, AnchorsUseNearestVertex) {
  const auto mesh = synth::unit_cube();
  const auto lat = cube_lattice(2);
  const auto binding = bind_skin(mesh, lat);
  const auto track = synth::breathing_track(mesh, Vec3::Constant(0.5), 0.1, 1.0, 30, 2.0);
  const auto coupling = couple_to_keyframes(lat, track, mesh, &binding, 1000, 10);
  ASSERT_EQ(coupling.anchors.size(), lat.particles.size());
  const auto nearest = nearest_vertices(mesh, lat);
  for (std::size_t p = 0; p < lat.particles.size(); ++p) {
    EXPECT_EQ(coupling.anchors[p].vertex, nearest[p]);
    // Each cube particle sits in its own corner octant.
    EXPECT_LT((mesh.vertices[nearest[p]] - lat.particles[p].position).norm(), 0.44);
    EXPECT_EQ(coupling.anchors[p].stiffness, 1000.0);
    EXPECT_EQ(coupling.anchors[p].damping, 10.0);
  }
}

TEST(RecordTrainingRun, StaticTrackSettlesAndAnchorsRelax) {
  const auto mesh = synth::unit_cube();
  const auto lat = cube_lattice(3);
  const auto binding = bind_skin(mesh, lat);
  KeyframeTrack track;
  track.fps = 30;
  track.frames = {mesh.vertices, mesh.vertices};
  auto coupling = couple_to_keyframes(lat, track, mesh, &binding, 1000, 10);
  SimState state;
  state.lattice = lat;
  // Kick the lattice so the anchors have something to do.
  for (auto& p : state.lattice.particles) p.velocity = Vec3(0.05, -0.02, 0.01);
  SimConfig cfg;
  cfg.substeps = 4;
  record_training_run(state, coupling, cfg, 4.0);
  double speed = 0.0;
  for (const auto& p : state.lattice.particles) speed = std::max(speed, p.velocity.norm());
  EXPECT_LT(speed, 1e-4);
  const auto& rec = coupling.recording;
  for (std::size_t p = 0; p < rec.particle_count; ++p) {
    EXPECT_LT(rec.anchor_force(rec.samples() - 1, p).norm(), 1e-3);
  }
}

TEST(RecordTrainingRun, LengthsFollowTargetsInTheKinematicLimit) {
  // Give the mesh a vertex on every particle so nearest-vertex targets are
  // the breathing motion of the particles themselves.
  auto mesh = synth::unit_cube();
  const auto lat = cube_lattice(2);
  for (const auto& p : lat.particles) mesh.vertices.push_back(p.position);
  const auto binding = bind_skin(mesh, lat);
  const auto track = synth::breathing_track(mesh, Vec3::Constant(0.5), 0.1, 1.0, 30, 3.0);
  auto coupling =
      couple_to_keyframes(lat, track, mesh, &binding, 1e5, 100, AnchorMapping::NearestVertex);
  SimState state;
  state.lattice = lat;
  SimConfig cfg;
  cfg.substeps = 40;
  record_training_run(state, coupling, cfg, 3.0);
  const auto& rec = coupling.recording;
  double worst = 0.0;
  for (std::size_t s = rec.transient_samples; s < rec.samples(); ++s) {
    const double t = rec.start_time + static_cast<double>(s) / rec.sample_rate;
    for (std::size_t c = 0; c < rec.constraint_count; ++c) {
      const double l0 = lat.constraints[c].rest_length0;
      const double want = l0 * (1.0 + 0.1 * std::sin(kTwoPi * t));
      worst = std::max(worst, std::abs(rec.length(s, c) - want) / (0.1 * l0));
    }
  }
  // Within 5% of the oscillation amplitude.
  EXPECT_LT(worst, 0.05);
}

TEST(RecordTrainingRun, BreathingFundamentalDominates) {
  const auto mesh = synth::subdivided_box(Vec3::Zero(), Vec3::Ones(), 4);
  const auto lat = testing::single_region_lattice(mesh, 4);
  const auto binding = bind_skin(mesh, lat);
  const auto track = synth::breathing_track(mesh, Vec3::Constant(0.5), 0.1, 1.0, 30, 3.0);
  auto coupling = couple_to_keyframes(lat, track, mesh, &binding, 1000, 10);
  SimState state;
  state.lattice = lat;
  SimConfig cfg;
  cfg.substeps = 4;
  record_training_run(state, coupling, cfg, 3.0);
  const auto series = region_relative_series(coupling.recording, lat, 0);
  // Two usable periods at 240 Hz: 1 Hz is bin 2.
  ASSERT_EQ(series.size(), 480u);
  std::size_t best = 1;
  double best_mag = 0.0;
  for (std::size_t k = 1; k < series.size() / 2; ++k) {
    const double m = std::abs(testing::oracle::dft(series, k));
    if (m > best_mag) {
      best_mag = m;
      best = k;
    }
  }
  EXPECT_EQ(best, 2u);
  auto fitted = lat;
  const auto report = fit_regions(coupling, fitted, 1);
  ASSERT_EQ(report.regions.size(), 1u);
  ASSERT_EQ(fitted.regions[0].actuation.harmonics.size(), 1u);
  EXPECT_NEAR(fitted.regions[0].actuation.harmonics[0].frequency, 1.0, 1e-12);
  EXPECT_GT(fitted.regions[0].actuation.harmonics[0].amplitude, 0.0);
}

TEST(RecordTrainingRun, RecordingLengthArithmetic) {
  const auto mesh = synth::unit_cube();
  const auto lat = cube_lattice(2);
  const auto binding = bind_skin(mesh, lat);
  const auto track = synth::breathing_track(mesh, Vec3::Constant(0.5), 0.1, 1.0, 30, 2.0);
  auto coupling = couple_to_keyframes(lat, track, mesh, &binding, 1000, 10);
  SimConfig cfg;
  cfg.substeps = 4;
  SimState state;
  state.lattice = lat;
  record_training_run(state, coupling, cfg, 2.5);
  const auto& rec = coupling.recording;
  EXPECT_EQ(rec.samples(), 600u);
  EXPECT_EQ(rec.period_samples, 240u);
  EXPECT_EQ(rec.transient_samples, 240u);
  // 360 samples remain; only one whole period is usable.
  EXPECT_EQ(rec.usable_samples(), 240u);
  EXPECT_EQ(rec.lengths.size(), 600u * lat.constraints.size());
  EXPECT_NEAR(rec.start_time, cfg.dt, 1e-15);

  SimState again;
  again.lattice = lat;
  EXPECT_THROW(record_training_run(again, coupling, cfg, 1.5), PreconditionError);
}

TEST(RecordTrainingRun, PinnedValveStaysPut) {
  const auto mesh = synth::organ(12, 24);
  const auto grid = voxelize(mesh, 8);
  const auto box = bounding_box(mesh.vertices);
  RegionSpec spec;
  RegionRule valve;
  valve.name = "valve";
  valve.pinned = true;
  valve.box = std::array<Vec3, 2>{
      Vec3(box.min.x(), box.min.y(), box.max.z() - 0.2 * box.extent().z()), box.max};
  spec.rules = {valve};
  const auto lat = build_lattice(grid, assign_regions(grid, spec).regions, Material{});
  const auto binding = bind_skin(mesh, lat);
  const auto track = synth::breathing_track(mesh, box.center(), 0.1, 1.0, 30, 2.0);
  auto coupling = couple_to_keyframes(lat, track, mesh, &binding, 1000, 10);
  SimState state;
  state.lattice = lat;
  SimConfig cfg;
  cfg.substeps = 4;
  record_training_run(state, coupling, cfg, 2.0);
  std::size_t pinned = 0;
  for (std::size_t p = 0; p < lat.particles.size(); ++p) {
    if (!lat.is_pinned(p)) continue;
    ++pinned;
    EXPECT_EQ(state.lattice.particles[p].position, lat.particles[p].position);
  }
  EXPECT_GT(pinned, 0u);
  const auto& rec = coupling.recording;
  for (std::size_t c = 0; c < lat.constraints.size(); ++c) {
    const auto& con = lat.constraints[c];
    if (!lat.is_pinned(con.i) || !lat.is_pinned(con.j)) continue;
    for (std::size_t s = 0; s < rec.samples(); s += 37) {
      EXPECT_NEAR(rec.length(s, c), con.rest_length0, 1e-12);
    }
  }
}

}  // namespace
}  // namespace softorgan
