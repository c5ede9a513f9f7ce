#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "softorgan/error.hpp"
#include "softorgan/synth.hpp"
#include "softorgan/tuner.hpp"
#include "test_support.hpp"

namespace softorgan {
namespace {

SimConfig fast_config() {
  SimConfig cfg;
  cfg.substeps = 4;
  return cfg;
}

// Small subdivided cube driven at 1 Hz and recorded as its own keyframe track.
struct SmallScene {
  Lattice truth;
  TrainingScene scene;
};

SmallScene small_scene(AnchorMapping mapping = AnchorMapping::InverseSkin) {
  const auto mesh = synth::subdivided_box(Vec3::Zero(), Vec3::Ones(), 2);
  const auto lat = testing::single_region_lattice(mesh, 2);
  auto truth = lat;
  truth.regions[0].actuation.harmonics = {{0.1, 1.0, 0.3}};
  auto track = synth::simulated_track(mesh, truth, fast_config(), 30.0, 3.0, 30);
  return {truth, make_training_scene(mesh, lat, track, mapping)};
}

TEST(Objective, ZeroAmplitudeMatchesClosedForm) {
  // With no actuation the lattice never leaves its rest pose, so J is the
  // RMS of the nearest-vertex breathing displacement over the sample frames.
  const auto mesh = synth::unit_cube();
  const auto lat = testing::single_region_lattice(mesh, 2);
  const Vec3 c(0.5, 0.5, 0.5);
  const auto track = synth::breathing_track(mesh, c, 0.1, 1.0, 30.0, 3.0);
  const auto scene = make_training_scene(mesh, lat, track, AnchorMapping::NearestVertex);
  const auto nearest = nearest_vertices(mesh, lat);

  const double duration = 2.0;
  double sq = 0.0;
  std::size_t n = 0;
  for (int k = 30; k <= 60; ++k) {
    const double s = 0.1 * std::sin(2.0 * std::numbers::pi * k / 30.0);
    for (auto v : nearest) {
      sq += (s * (mesh.vertices[v] - c)).squaredNorm();
      ++n;
    }
  }
  const double want = std::sqrt(sq / static_cast<double>(n)) / std::sqrt(3.0);
  const double got = objective(params_of(lat), scene, fast_config(), duration);
  EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, want));
  EXPECT_GT(got, 0.0);
}

TEST(Objective, TruthScoresNearZeroAndBelowZeroActuation) {
  const auto s = small_scene();
  const double truth = objective(params_of(s.truth), s.scene, fast_config(), 2.0);
  const double idle = objective(params_of(s.scene.lattice), s.scene, fast_config(), 2.0);
  EXPECT_LT(truth, 1e-6);
  EXPECT_GT(idle, 100.0 * truth);
}

TEST(Objective, NearestVertexTruthStaysSmall) {
  const auto s = small_scene(AnchorMapping::NearestVertex);
  EXPECT_LT(objective(params_of(s.truth), s.scene, fast_config(), 2.0), 0.02);
}

TEST(Objective, BlowUpScoresInfinity) {
  const auto s = small_scene();
  auto cfg = fast_config();
  cfg.gravity = Vec3(0.0, 0.0, -1e9);
  EXPECT_EQ(objective(params_of(s.truth), s.scene, cfg, 2.0), kUnstableObjective);
}

TEST(Objective, RejectsShortDuration) {
  const auto s = small_scene();
  EXPECT_THROW(objective(params_of(s.truth), s.scene, fast_config(), 0.9), PreconditionError);
}

TEST(Objective, DriftIsFreeMinusCoupled) {
  const auto s = small_scene();
  RegionParams p{ActuationSignal{{{0.05, 1.1, 0.0}}}};
  const auto cfg = fast_config();
  const double free_j = objective(p, s.scene, cfg, 2.0);
  const double coupled = coupled_objective(p, s.scene, cfg, 2.0);
  EXPECT_DOUBLE_EQ(evaluate_drift(p, s.scene, cfg, 2.0), free_j - coupled);
  // Anchors pull the run toward the targets.
  EXPECT_LT(coupled, free_j);
}

TEST(ApplyParams, SizeMismatchAndInvalidSignals) {
  auto lat = testing::single_region_lattice(synth::unit_cube(), 2);
  EXPECT_THROW(apply_params(lat, {}), ValidationError);
  EXPECT_THROW(apply_params(lat, {ActuationSignal{{{1.5, 1.0, 0.0}}}}), ValidationError);
  apply_params(lat, {ActuationSignal{{{0.2, 2.0, 0.0}}}});
  EXPECT_EQ(params_of(lat)[0].harmonics[0].frequency, 2.0);
}

TEST(Perturb, CandidatesAlwaysSatisfyInvariants) {
  const auto mesh = synth::subdivided_box(Vec3::Zero(), Vec3(2, 1, 1), 2);
  const auto grid = voxelize(mesh, 4);
  RegionSpec spec;
  RegionRule pinned;
  pinned.name = "valve";
  pinned.pinned = true;
  pinned.box = std::array<Vec3, 2>{Vec3(1.5, 0, 0), Vec3(2, 1, 1)};
  spec.rules = {pinned};
  const auto lat = build_lattice(grid, assign_regions(grid, spec).regions, Material{});
  RegionParams p{ActuationSignal{{{0.05, 1.0, 0.1}}},
                 ActuationSignal{{{0.4, 1.0, 6.2}, {0.4, 1.01, 0.0}}}};
  const StepScales big{0.5, 0.5, 3.0};
  std::mt19937_64 rng(9);
  for (int i = 0; i < 2000; ++i) {
    p = perturb(p, lat, big, rng);
    ASSERT_EQ(p[0], (ActuationSignal{{{0.05, 1.0, 0.1}}}));
    ASSERT_TRUE(p[1].is_valid()) << i;
  }
}

TEST(Tune, ZeroSigmaEchoesTheInitialObjective) {
  const auto s = small_scene();
  TuneConfig tc;
  tc.iterations = 1;
  tc.population = 2;
  tc.sigma = {0.0, 0.0, 0.0};
  const RegionParams init{ActuationSignal{{{0.05, 1.0, 0.0}}}};
  const auto report = tune(s.scene, init, tc, fast_config());
  EXPECT_EQ(report.initial_objective, objective(init, s.scene, fast_config(), tc.eval_duration));
  EXPECT_EQ(report.best_objective, report.initial_objective);
  ASSERT_EQ(report.history.size(), 1u);
  EXPECT_EQ(report.history[0].objective, report.initial_objective);
  EXPECT_EQ(report.best_params, init);
  EXPECT_EQ(report.evaluations, 3u);
}

TEST(Tune, ImprovesAndBestIsMonotone) {
  const auto s = small_scene();
  TuneConfig tc;
  tc.iterations = 40;
  tc.population = 4;
  tc.sigma = {0.01, 0.01, 0.1};
  const RegionParams init{ActuationSignal{{{0.05, 1.0, 0.0}}}};
  int calls = 0;
  tc.progress = [&](int it, double, double) { EXPECT_EQ(it, ++calls); };
  const auto report = tune(s.scene, init, tc, fast_config());
  EXPECT_EQ(calls, 40);
  ASSERT_EQ(report.history.size(), 40u);
  double prev = report.initial_objective;
  double temp = tc.initial_temperature;
  for (const auto& h : report.history) {
    EXPECT_LE(h.best, prev);
    EXPECT_LE(h.best, h.objective);
    EXPECT_NEAR(h.temperature, temp, 1e-15);
    prev = h.best;
    temp *= tc.cooling;
  }
  EXPECT_LT(report.best_objective, report.initial_objective);
  EXPECT_NEAR(objective(report.best_params, s.scene, fast_config(), tc.eval_duration),
              report.best_objective, 1e-15);
}

TEST(Tune, SameSeedIsReproducible) {
  const auto s = small_scene();
  TuneConfig tc;
  tc.iterations = 15;
  tc.population = 3;
  tc.seed = 42;
  const RegionParams init{ActuationSignal{{{0.05, 1.0, 0.0}}}};
  const auto a = tune(s.scene, init, tc, fast_config());
  const auto b = tune(s.scene, init, tc, fast_config());
  EXPECT_EQ(a.best_params, b.best_params);
  EXPECT_EQ(a.best_objective, b.best_objective);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].objective, b.history[i].objective);
  }
  tc.seed = 43;
  const auto c = tune(s.scene, init, tc, fast_config());
  EXPECT_NE(a.best_params, c.best_params);
}

TEST(Tune, ThreadCountDoesNotChangeTheResult) {
  const auto s = small_scene();
  TuneConfig tc;
  tc.iterations = 10;
  tc.population = 5;
  const RegionParams init{ActuationSignal{{{0.05, 1.0, 0.0}}}};
  const auto serial = tune(s.scene, init, tc, fast_config());
  tc.threads = 3;
  const auto parallel = tune(s.scene, init, tc, fast_config());
  EXPECT_EQ(serial.best_params, parallel.best_params);
  EXPECT_EQ(serial.best_objective, parallel.best_objective);
  ASSERT_EQ(serial.history.size(), parallel.history.size());
  for (std::size_t i = 0; i < serial.history.size(); ++i) {
    EXPECT_EQ(serial.history[i].objective, parallel.history[i].objective);
  }
}

TEST(Tune, UnstableCandidatesAreNeverAccepted) {
  const auto s = small_scene();
  auto cfg = fast_config();
  cfg.gravity = Vec3(0.0, 0.0, -1e9);
  TuneConfig tc;
  tc.iterations = 3;
  tc.population = 2;
  const auto report = tune(s.scene, params_of(s.scene.lattice), tc, cfg);
  EXPECT_EQ(report.rejected_unstable, report.evaluations);
  EXPECT_EQ(report.best_params, params_of(s.scene.lattice));
}

TEST(TuneConfig, RejectsBadSettings) {
  auto bad = [](auto edit) {
    TuneConfig tc;
    edit(tc);
    return tc;
  };
  EXPECT_THROW(bad([](TuneConfig& t) { t.iterations = 0; }).validate(), PreconditionError);
  EXPECT_THROW(bad([](TuneConfig& t) { t.cooling = 1.0; }).validate(), PreconditionError);
  EXPECT_THROW(bad([](TuneConfig& t) { t.initial_temperature = 0.0; }).validate(),
               PreconditionError);
  EXPECT_THROW(bad([](TuneConfig& t) { t.sigma.phase = -1.0; }).validate(), PreconditionError);
  EXPECT_THROW(bad([](TuneConfig& t) { t.population = 0; }).validate(), PreconditionError);
  EXPECT_THROW(bad([](TuneConfig& t) { t.threads = 0; }).validate(), PreconditionError);
  EXPECT_NO_THROW(TuneConfig{}.validate());
}

}  // namespace
}  // namespace softorgan
