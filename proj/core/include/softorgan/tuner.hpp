#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "softorgan/dynamics.hpp"
#include "softorgan/lattice.hpp"
#include "softorgan/mesh_io.hpp"
#include "softorgan/training.hpp"

namespace softorgan {

// Per-region actuation, indexed by region id.
using RegionParams = std::vector<ActuationSignal>;

RegionParams params_of(const Lattice& lattice);
// Throws ValidationError on a size mismatch or an invalid signal.
void apply_params(Lattice& lattice, const RegionParams& params);

// Everything an objective evaluation needs. The lattice is in its rest pose.
struct TrainingScene {
  TriMesh mesh;
  Lattice lattice;
  SkinBinding binding;
  KeyframeTrack track;
  ParticleTargets targets;
  double coupling_stiffness = 1000.0;
  double coupling_damping = 10.0;
  double diagonal = 1.0;  // mesh bounding-box diagonal, m
};

TrainingScene make_training_scene(TriMesh mesh, Lattice lattice, KeyframeTrack track,
                                  AnchorMapping mapping = AnchorMapping::InverseSkin,
                                  double coupling_stiffness = 1000.0,
                                  double coupling_damping = 10.0);

inline constexpr double kUnstableObjective = std::numeric_limits<double>::infinity();

// RMS particle distance to the track-derived targets over the keyframe
// instants after the first period, divided by the mesh diagonal. The
// simulation starts from the rest pose and is driven by `params`. Returns
// kUnstableObjective when the run blows up.
double objective(const RegionParams& params, const TrainingScene& scene, const SimConfig& cfg,
                 double duration);

// Same measurement with the training anchors attached.
double coupled_objective(const RegionParams& params, const TrainingScene& scene,
                         const SimConfig& cfg, double duration);

// J_free - J_coupled: how far open-loop playback wanders from the training
// motion compared with the anchored run.
double evaluate_drift(const RegionParams& params, const TrainingScene& scene, const SimConfig& cfg,
                      double duration);

struct StepScales {
  double amplitude = 0.005;  // dimensionless
  double frequency = 0.005;  // Hz
  double phase = 0.05;       // rad
};

struct TuneConfig {
  int iterations = 200;
  double initial_temperature = 1e-3;
  double cooling = 0.97;
  StepScales sigma;
  std::uint64_t seed = 1;
  double eval_duration = 2.0;  // s
  int population = 8;
  int threads = 1;  // candidate evaluations in flight
  // Called after every iteration with (iteration, current objective, temperature).
  std::function<void(int, double, double)> progress;

  void validate() const;
};

struct TuneIteration {
  int iteration = 0;
  double objective = 0.0;  // accepted (current) candidate
  double best = 0.0;       // best so far
  double temperature = 0.0;
};

struct TuneReport {
  RegionParams best_params;
  double initial_objective = 0.0;
  double best_objective = 0.0;
  std::vector<TuneIteration> history;
  std::size_t evaluations = 0;
  std::size_t rejected_unstable = 0;
};

// Draws a Gaussian neighbour of `params` and repairs it so every signal
// satisfies its invariants. Pinned regions are left untouched.
RegionParams perturb(const RegionParams& params, const Lattice& lattice, const StepScales& sigma,
                     std::mt19937_64& rng);

// Simulated annealing over per-region harmonics; reproducible from tc.seed.
TuneReport tune(const TrainingScene& scene, const RegionParams& initial, const TuneConfig& tc,
                const SimConfig& cfg);

}  // namespace softorgan
