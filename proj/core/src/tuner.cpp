#include "softorgan/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

#include "softorgan/error.hpp"

namespace softorgan {

namespace {

// Keyframe instants after the first period, as step indices.
std::vector<std::size_t> sample_steps(const TrainingScene& scene, const SimConfig& cfg,
                                      double duration) {
  const auto& track = scene.track;
  const double period = track.period_seconds();
  const double frame_dt = 1.0 / track.fps;
  if (duration < period + frame_dt - 1e-12) {
    throw PreconditionError("objective duration must cover a period past the transient one");
  }
  std::vector<std::size_t> steps;
  const auto first = static_cast<long long>(std::ceil(period * track.fps - 1e-9));
  const auto last = static_cast<long long>(std::floor(duration * track.fps + 1e-9));
  for (long long k = first; k <= last; ++k) {
    const auto s = static_cast<std::size_t>(std::llround(static_cast<double>(k) * frame_dt / cfg.dt));
    if (steps.empty() || steps.back() != s) steps.push_back(s);
  }
  return steps;
}

double run_and_measure(const RegionParams& params, const TrainingScene& scene, const SimConfig& cfg,
                       double duration, const TrainingCoupling* coupling) {
  const auto samples = sample_steps(scene, cfg, duration);
  SimState state;
  state.lattice = scene.lattice;
  apply_params(state.lattice, params);
  const auto rest = region_actuation(cfg.rest_clamp_epsilon);
  const ForceFn extra = coupling ? coupling->force_fn() : ForceFn{};

  std::vector<Vec3> targets;
  double sq = 0.0;
  std::size_t count = 0;
  std::size_t next = 0;
  const std::size_t np = state.lattice.particles.size();
  try {
    while (next < samples.size()) {
      if (state.step == samples[next]) {
        scene.targets.positions(state.time, targets);
        for (std::size_t p = 0; p < np; ++p) {
          sq += (state.lattice.particles[p].position - targets[p]).squaredNorm();
        }
        count += np;
        ++next;
        continue;
      }
      step(state, cfg, rest, extra);
    }
  } catch (const InstabilityDetected&) {
    return kUnstableObjective;
  }
  if (count == 0) return 0.0;
  return std::sqrt(sq / static_cast<double>(count)) / scene.diagonal;
}

}  // namespace

RegionParams params_of(const Lattice& lattice) {
  RegionParams out;
  out.reserve(lattice.regions.size());
  for (const auto& r : lattice.regions) out.push_back(r.actuation);
  return out;
}

void apply_params(Lattice& lattice, const RegionParams& params) {
  if (params.size() != lattice.regions.size()) {
    throw ValidationError("expected " + std::to_string(lattice.regions.size()) +
                          " region signals, got " + std::to_string(params.size()));
  }
  for (std::size_t r = 0; r < params.size(); ++r) {
    params[r].validate();
    lattice.regions[r].actuation = params[r];
  }
}

TrainingScene make_training_scene(TriMesh mesh, Lattice lattice, KeyframeTrack track,
                                  AnchorMapping mapping, double coupling_stiffness,
                                  double coupling_damping) {
  track.validate();
  if (track.width() != mesh.vertices.size()) {
    throw WidthMismatch(mesh.vertices.size(), track.width());
  }
  TrainingScene scene;
  scene.binding = bind_skin(mesh, lattice);
  scene.targets = ParticleTargets(track, mesh, lattice, scene.binding, mapping);
  scene.diagonal = bounding_box(mesh.vertices).diagonal();
  scene.coupling_stiffness = coupling_stiffness;
  scene.coupling_damping = coupling_damping;
  scene.mesh = std::move(mesh);
  scene.lattice = std::move(lattice);
  scene.track = std::move(track);
  return scene;
}

double objective(const RegionParams& params, const TrainingScene& scene, const SimConfig& cfg,
                 double duration) {
  check_stability(cfg, scene.lattice);
  return run_and_measure(params, scene, cfg, duration, nullptr);
}

double coupled_objective(const RegionParams& params, const TrainingScene& scene,
                         const SimConfig& cfg, double duration) {
  check_stability(cfg, scene.lattice, scene.coupling_stiffness);
  TrainingCoupling coupling;
  coupling.stiffness = scene.coupling_stiffness;
  coupling.damping = scene.coupling_damping;
  coupling.targets = scene.targets;
  return run_and_measure(params, scene, cfg, duration, &coupling);
}

double evaluate_drift(const RegionParams& params, const TrainingScene& scene, const SimConfig& cfg,
                      double duration) {
  return objective(params, scene, cfg, duration) -
         coupled_objective(params, scene, cfg, duration);
}

void TuneConfig::validate() const {
  if (iterations < 1) throw PreconditionError("iterations must be >= 1");
  if (!(initial_temperature > 0.0)) throw PreconditionError("initial temperature must be > 0");
  if (!(cooling > 0.0 && cooling < 1.0)) throw PreconditionError("cooling must lie in (0, 1)");
  if (sigma.amplitude < 0.0 || sigma.frequency < 0.0 || sigma.phase < 0.0) {
    throw PreconditionError("sigma entries must be >= 0");
  }
  if (population < 1) throw PreconditionError("population must be >= 1");
  if (threads < 1) throw PreconditionError("threads must be >= 1");
  if (!(eval_duration > 0.0)) throw PreconditionError("eval duration must be > 0");
}

RegionParams perturb(const RegionParams& params, const Lattice& lattice, const StepScales& sigma,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RegionParams out = params;
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (lattice.regions[r].pinned) continue;
    for (auto& h : out[r].harmonics) {
      h.amplitude += sigma.amplitude * normal(rng);
      h.frequency += sigma.frequency * normal(rng);
      h.phase += sigma.phase * normal(rng);
    }
    enforce_signal_invariants(out[r]);
  }
  return out;
}

TuneReport tune(const TrainingScene& scene, const RegionParams& initial, const TuneConfig& tc,
                const SimConfig& cfg) {
  tc.validate();
  check_stability(cfg, scene.lattice);

  TuneReport report;
  RegionParams current = initial;
  for (auto& s : current) enforce_signal_invariants(s);
  double current_j = objective(current, scene, cfg, tc.eval_duration);
  ++report.evaluations;
  if (!std::isfinite(current_j)) ++report.rejected_unstable;
  report.initial_objective = current_j;
  report.best_params = current;
  report.best_objective = current_j;

  std::mt19937_64 rng(tc.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double temperature = tc.initial_temperature;
  const auto pop = static_cast<std::size_t>(tc.population);
  std::vector<RegionParams> candidates(pop);
  std::vector<double> scores(pop);

  for (int it = 1; it <= tc.iterations; ++it) {
    for (auto& c : candidates) c = perturb(current, scene.lattice, tc.sigma, rng);

    // Evaluations are independent; results land in fixed slots so the
    // selection below does not depend on completion order.
    for (std::size_t begin = 0; begin < pop; begin += static_cast<std::size_t>(tc.threads)) {
      const std::size_t end = std::min(pop, begin + static_cast<std::size_t>(tc.threads));
      if (end - begin == 1) {
        scores[begin] = objective(candidates[begin], scene, cfg, tc.eval_duration);
        continue;
      }
      std::vector<std::future<double>> jobs;
      for (std::size_t c = begin; c < end; ++c) {
        jobs.push_back(std::async(std::launch::async, [&, c] {
          return objective(candidates[c], scene, cfg, tc.eval_duration);
        }));
      }
      for (std::size_t c = begin; c < end; ++c) scores[c] = jobs[c - begin].get();
    }
    report.evaluations += pop;

    std::size_t pick = 0;
    for (std::size_t c = 0; c < pop; ++c) {
      if (!std::isfinite(scores[c])) ++report.rejected_unstable;
      if (scores[c] < scores[pick]) pick = c;
    }
    const double delta = scores[pick] - current_j;
    const double u = uniform(rng);
    const bool accept = std::isfinite(scores[pick]) &&
                        (delta < 0.0 || u < std::exp(-delta / temperature));
    if (accept) {
      current = candidates[pick];
      current_j = scores[pick];
    }
    if (current_j < report.best_objective) {
      report.best_objective = current_j;
      report.best_params = current;
    }
    report.history.push_back({it, current_j, report.best_objective, temperature});
    if (tc.progress) tc.progress(it, current_j, temperature);
    temperature *= tc.cooling;
  }
  return report;
}

}  // namespace softorgan
