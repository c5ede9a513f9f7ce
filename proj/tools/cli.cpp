#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <thread>

#include <CLI11.hpp>

#include "softorgan/dynamics.hpp"
#include "softorgan/error.hpp"
#include "softorgan/json_io.hpp"
#include "softorgan/session.hpp"
#include "softorgan/training.hpp"
#include "softorgan/tuner.hpp"
#include "ws_server.hpp"

namespace softorgan::cli {

namespace {

namespace fs = std::filesystem;

struct SimFlags {
  double dt = 1.0 / 240.0;
  int substeps = 1;
  double global_damping = 0.0;
  double epsilon = 0.1;

  SimConfig config() const {
    SimConfig cfg;
    cfg.dt = dt;
    cfg.substeps = substeps;
    cfg.global_damping = global_damping;
    cfg.rest_clamp_epsilon = epsilon;
    cfg.validate();
    return cfg;
  }
};

void add_sim_flags(CLI::App* app, SimFlags& f) {
  app->add_option("--dt", f.dt, "Time step in seconds")->check(CLI::PositiveNumber);
  app->add_option("--substeps", f.substeps, "Integrator substeps per step")
      ->check(CLI::Range(1, 1 << 20));
  app->add_option("--global-damping", f.global_damping, "Velocity damping rate (1/s)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--clamp-epsilon", f.epsilon, "Rest-length clamp margin")
      ->check(CLI::Range(0.0, 0.999));
}

void ensure_parent(const fs::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string plural(std::size_t n, const char* word) {
  return std::to_string(n) + " " + word + (n == 1 ? "" : "s");
}

AnchorMapping parse_mapping(const std::string& s) {
  return s == "nearest" ? AnchorMapping::NearestVertex : AnchorMapping::InverseSkin;
}

// Scene inputs shared by fit, tune and serve.
struct SceneFiles {
  std::string lattice;
  std::string mesh;
  std::string keyframes;
  std::string params;
};

struct LoadedScene {
  LatticePackage pkg;
  TriMesh mesh;
};

LoadedScene load_scene(const SceneFiles& files) {
  LoadedScene s{load_lattice_package(files.lattice), {}};
  s.mesh = files.mesh.empty() ? s.pkg.mesh : load_mesh(files.mesh);
  if (!files.params.empty()) {
    apply_params(s.pkg.lattice, load_params(files.params, s.pkg.lattice.regions.size()));
  }
  return s;
}

double default_training_duration(const KeyframeTrack& track) {
  if (track.period_frames) return 3.0 * track.period_seconds();
  return static_cast<double>(track.frames.size()) / track.fps;
}

// voxelize -----------------------------------------------------------------

struct VoxelizeArgs {
  std::string mesh;
  int resolution = 8;
  std::string regions;
  Material material;
  std::string out;
};

int cmd_voxelize(const VoxelizeArgs& a, std::ostream& out, std::ostream& err) {
  LatticePackage pkg;
  pkg.mesh = load_mesh(a.mesh);
  pkg.resolution = a.resolution;
  pkg.material = a.material;
  pkg.grid = voxelize(pkg.mesh, a.resolution);
  const RegionSpec spec = a.regions.empty() ? RegionSpec{} : load_region_spec(a.regions);
  auto assignment = assign_regions(pkg.grid, spec);
  for (const auto& w : assignment.warnings) err << "warning: " << w << '\n';
  pkg.lattice = build_lattice(pkg.grid, std::move(assignment.regions), a.material);
  ensure_parent(a.out);
  write_json_file(lattice_package_to_json(pkg), a.out);
  out << plural(pkg.lattice.particles.size(), "particle") << ", "
      << plural(pkg.lattice.constraints.size(), "constraint") << ", "
      << plural(pkg.lattice.regions.size(), "region") << '\n';
  return kOk;
}

// simulate -----------------------------------------------------------------

struct SimulateArgs {
  std::string lattice;
  std::string params;
  double duration = 1.0;
  double fps = 30.0;
  std::uint64_t seed = 0;
  SimFlags sim;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  auto scene = load_scene({a.lattice, "", "", a.params});
  const SimConfig cfg = a.sim.config();
  auto& lattice = scene.pkg.lattice;
  check_stability(cfg, lattice);
  const auto binding = bind_skin(scene.mesh, lattice);
  const auto rest = region_actuation(cfg.rest_clamp_epsilon);

  const auto total_steps = static_cast<std::uint64_t>(std::llround(a.duration / cfg.dt));
  const auto frames = static_cast<std::size_t>(std::llround(a.duration * a.fps));
  SimState state;
  state.lattice = lattice;
  ensure_parent(a.out);

  TriMesh skinned = scene.mesh;
  auto export_at = [&](std::size_t k) {
    skin_positions(binding, state.lattice.positions(), skinned.vertices);
    export_frame(skinned, frame_filename(a.out, k));
  };

  double energy_sum = 0.0;
  std::size_t next_frame = 0;
  const auto start = std::chrono::steady_clock::now();
  try {
    for (;;) {
      while (next_frame < frames &&
             static_cast<std::uint64_t>(std::llround(next_frame / (a.fps * cfg.dt))) <=
                 state.step) {
        export_at(next_frame++);
      }
      if (state.step >= total_steps) break;
      step(state, cfg, rest);
      energy_sum += mechanical_energy(state, cfg, rest);
    }
  } catch (const InstabilityDetected& e) {
    err << "error: unstable at step " << state.step << " (t=" << state.time << "): " << e.what()
        << '\n';
    return kUnstable;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << "steps=" << state.step << " frames=" << next_frame
      << " steps_per_sec=" << (secs > 0.0 ? static_cast<double>(state.step) / secs : 0.0)
      << " mean_energy=" << (state.step ? energy_sum / static_cast<double>(state.step) : 0.0)
      << '\n';
  return kOk;
}

// fit ----------------------------------------------------------------------

struct FitArgs {
  SceneFiles files;
  int harmonics = 1;
  double duration = 0.0;
  double coupling_stiffness = 1000.0;
  double coupling_damping = 10.0;
  std::string mapping = "inverse";
  SimFlags sim;
  std::string out;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  if (a.harmonics < 1) throw PreconditionError("K must be >= 1");
  auto scene = load_scene(a.files);
  const auto track = load_keyframes(a.files.keyframes, scene.mesh);
  const SimConfig cfg = a.sim.config();
  auto& lattice = scene.pkg.lattice;
  const auto binding = bind_skin(scene.mesh, lattice);
  auto coupling = couple_to_keyframes(lattice, track, scene.mesh, &binding, a.coupling_stiffness,
                                      a.coupling_damping, parse_mapping(a.mapping));
  SimState state;
  state.lattice = lattice;
  const double duration = a.duration > 0.0 ? a.duration : default_training_duration(track);
  record_training_run(state, coupling, cfg, duration);
  const auto report = fit_regions(coupling, lattice, a.harmonics);
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';

  std::vector<double> residuals;
  out << "region  name              f1(Hz)      a1          residual\n";
  for (const auto& r : report.regions) {
    residuals.push_back(r.residual);
    out << std::left << std::setw(8) << r.id << std::setw(18) << r.name;
    if (r.skipped || r.signal.harmonics.empty()) {
      out << "skipped\n";
      continue;
    }
    const auto& h = r.signal.harmonics.front();
    out << std::setw(12) << h.frequency << std::setw(12) << h.amplitude << r.residual << '\n';
  }
  out << "residual " << report.residual << " over " << report.samples_used << " samples\n";
  ensure_parent(a.out);
  write_json_file(params_to_json(lattice, params_of(lattice), residuals), a.out);
  return kOk;
}

// tune ---------------------------------------------------------------------

struct TuneArgs {
  SceneFiles files;
  TuneConfig tc;
  double coupling_stiffness = 1000.0;
  double coupling_damping = 10.0;
  std::string mapping = "inverse";
  SimFlags sim;
  std::string out;
  std::string report;
};

std::string report_path_for(const std::string& out) {
  fs::path p(out);
  return (p.parent_path() / (p.stem().string() + "_report.json")).string();
}

int cmd_tune(TuneArgs a, std::ostream& out, std::ostream&) {
  auto scene = load_scene(a.files);
  auto track = load_keyframes(a.files.keyframes, scene.mesh);
  if (!track.period_frames) throw PreconditionError("tuning needs a keyframe track with a period");
  const SimConfig cfg = a.sim.config();
  if (!(a.tc.eval_duration > 0.0)) a.tc.eval_duration = 2.0 * track.period_seconds();
  const auto initial = params_of(scene.pkg.lattice);
  const auto training =
      make_training_scene(scene.mesh, scene.pkg.lattice, std::move(track),
                          parse_mapping(a.mapping), a.coupling_stiffness, a.coupling_damping);
  a.tc.progress = [&out](int iter, double j, double temp) {
    out << "iter " << iter << " objective " << j << " temperature " << temp << '\n';
  };
  const auto report = tune(training, initial, a.tc, cfg);
  out << "initial " << report.initial_objective << " best " << report.best_objective << '\n';
  ensure_parent(a.out);
  write_json_file(params_to_json(training.lattice, report.best_params), a.out);
  const std::string report_path = a.report.empty() ? report_path_for(a.out) : a.report;
  ensure_parent(report_path);
  write_json_file(tune_report_to_json(report, training.lattice), report_path);
  return kOk;
}

// serve --------------------------------------------------------------------

struct ServeArgs {
  SceneFiles files;
  service::ServerOptions server;
  int decimation = 4;
  int tune_iterations = 50;
  std::uint64_t seed = 1;
  double run_for = 0.0;
  SimFlags sim;
};

struct TuneCancelled {};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream&) {
  auto scene = load_scene(a.files);
  SessionConfig sc;
  sc.sim = a.sim.config();
  sc.stream_decimation = a.decimation;
  Session session(scene.mesh, scene.pkg.lattice, sc);

  // Wait on SIGINT/SIGTERM synchronously when running until interrupted.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  if (a.run_for <= 0.0) pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::Server server(session, a.server);
  server.start();
  out << "listening on ws://" << a.server.address << ':' << server.port() << std::endl;

  std::atomic<bool> cancel{false};
  std::thread tuner;
  if (!a.files.keyframes.empty()) {
    auto track = load_keyframes(a.files.keyframes, scene.mesh);
    if (!track.period_frames) throw PreconditionError("tuning needs a keyframe track with a period");
    tuner = std::thread([&, track = std::move(track)]() mutable {
      try {
        TuneConfig tc;
        tc.iterations = a.tune_iterations;
        tc.seed = a.seed;
        tc.eval_duration = 2.0 * track.period_seconds();
        tc.progress = [&](int iter, double j, double) {
          if (cancel) throw TuneCancelled{};
          session.broadcast(wire::TuneProgress{iter, j});
        };
        SimConfig cfg = sc.sim;
        cfg.substeps = std::max(cfg.substeps, 4);
        const auto training = make_training_scene(scene.mesh, scene.pkg.lattice, std::move(track));
        const auto report = tune(training, params_of(training.lattice), tc, cfg);
        for (std::size_t r = 0; r < report.best_params.size(); ++r) {
          if (training.lattice.regions[r].pinned) continue;
          session.submit(wire::SetParams{static_cast<int>(r), report.best_params[r], {}}, {});
        }
      } catch (const TuneCancelled&) {
      } catch (const Error& e) {
        session.broadcast(wire::Error{std::string("tune: ") + e.what()});
      }
    });
  }

  if (a.run_for > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(a.run_for));
  } else {
    int sig = 0;
    sigwait(&signals, &sig);
  }
  cancel = true;
  if (tuner.joinable()) tuner.join();
  server.stop();
  out << "served " << session.step_count() << " steps\n";
  return kOk;
}

void add_scene_options(CLI::App* app, SceneFiles& f, bool keyframes_required) {
  app->add_option("lattice", f.lattice, "Lattice file written by voxelize")
      ->required()
      ->check(CLI::ExistingFile);
  if (keyframes_required) {
    app->add_option("keyframes", f.keyframes, "Keyframe track (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
  }
  app->add_option("--mesh", f.mesh, "Mesh to skin (default: the lattice's own mesh)")
      ->check(CLI::ExistingFile);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Voxel-lattice soft-body organ simulator"};
  app.name("softorgan");
  app.require_subcommand(1);

  VoxelizeArgs vox;
  auto* voxelize_cmd = app.add_subcommand("voxelize", "Build a lattice from a mesh");
  voxelize_cmd->add_option("mesh", vox.mesh, "OBJ mesh")->required()->check(CLI::ExistingFile);
  voxelize_cmd->add_option("--resolution", vox.resolution, "Cells along the longest axis")
      ->check(CLI::PositiveNumber);
  voxelize_cmd->add_option("--regions", vox.regions, "Region spec (JSON)")
      ->check(CLI::ExistingFile);
  voxelize_cmd->add_option("--stiffness", vox.material.stiffness, "Spring stiffness (N/m)");
  voxelize_cmd->add_option("--damping", vox.material.damping, "Spring damping (N s/m)");
  voxelize_cmd->add_option("--mass", vox.material.particle_mass, "Particle mass (kg)");
  voxelize_cmd->add_option("--out", vox.out, "Lattice file to write")->required();

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Play back actuation and export frames");
  simulate_cmd->add_option("lattice", sim.lattice, "Lattice file")
      ->required()
      ->check(CLI::ExistingFile);
  simulate_cmd->add_option("--params", sim.params, "Fitted parameters (JSON)")
      ->check(CLI::ExistingFile);
  simulate_cmd->add_option("--duration", sim.duration, "Seconds to simulate")
      ->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--fps", sim.fps, "Export rate")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", sim.seed, "Accepted for symmetry; playback is not random");
  simulate_cmd->add_option("--out", sim.out, "Frame prefix, frames go to <out>_NNNN.obj")
      ->required();
  add_sim_flags(simulate_cmd, sim.sim);

  FitArgs fit;
  fit.sim.substeps = 4;
  auto* fit_cmd = app.add_subcommand("fit", "Fit region actuation from a keyframe track");
  add_scene_options(fit_cmd, fit.files, true);
  fit_cmd->add_option("--params", fit.files.params, "Start from these parameters")
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("-K,--harmonics", fit.harmonics, "Harmonics per region (1-4)");
  fit_cmd->add_option("--duration", fit.duration,
                      "Training run length in seconds (default: three periods)");
  fit_cmd->add_option("--coupling-stiffness", fit.coupling_stiffness)->check(CLI::PositiveNumber);
  fit_cmd->add_option("--coupling-damping", fit.coupling_damping)
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--mapping", fit.mapping, "Anchor targets: inverse or nearest")
      ->check(CLI::IsMember({"inverse", "nearest"}));
  fit_cmd->add_option("--out", fit.out, "Parameters file to write")->required();
  add_sim_flags(fit_cmd, fit.sim);

  TuneArgs tn;
  tn.sim.substeps = 4;
  tn.tc.eval_duration = 0.0;
  auto* tune_cmd = app.add_subcommand("tune", "Anneal region actuation against a keyframe track");
  add_scene_options(tune_cmd, tn.files, true);
  tune_cmd->add_option("--params", tn.files.params, "Initial parameters (default: lattice)")
      ->check(CLI::ExistingFile);
  tune_cmd->add_option("--iterations", tn.tc.iterations)->check(CLI::NonNegativeNumber);
  tune_cmd->add_option("--population", tn.tc.population)->check(CLI::PositiveNumber);
  tune_cmd->add_option("--temperature", tn.tc.initial_temperature)->check(CLI::PositiveNumber);
  tune_cmd->add_option("--cooling", tn.tc.cooling)->check(CLI::Range(0.0, 1.0));
  tune_cmd->add_option("--sigma-amplitude", tn.tc.sigma.amplitude)
      ->check(CLI::NonNegativeNumber);
  tune_cmd->add_option("--sigma-frequency", tn.tc.sigma.frequency)
      ->check(CLI::NonNegativeNumber);
  tune_cmd->add_option("--sigma-phase", tn.tc.sigma.phase)->check(CLI::NonNegativeNumber);
  tune_cmd->add_option("--seed", tn.tc.seed);
  tune_cmd->add_option("--threads", tn.tc.threads)->check(CLI::PositiveNumber);
  tune_cmd->add_option("--eval-duration", tn.tc.eval_duration,
                       "Objective window in seconds (default: two periods)");
  tune_cmd->add_option("--coupling-stiffness", tn.coupling_stiffness)->check(CLI::PositiveNumber);
  tune_cmd->add_option("--coupling-damping", tn.coupling_damping)->check(CLI::NonNegativeNumber);
  tune_cmd->add_option("--mapping", tn.mapping)->check(CLI::IsMember({"inverse", "nearest"}));
  tune_cmd->add_option("--out", tn.out, "Best parameters file to write")->required();
  tune_cmd->add_option("--report", tn.report, "Report file (default: <out stem>_report.json)");
  add_sim_flags(tune_cmd, tn.sim);

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the live steering service");
  add_scene_options(serve_cmd, sv.files, false);
  serve_cmd->add_option("--params", sv.files.params, "Initial parameters")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--keyframes", sv.files.keyframes,
                        "Tune against this track in the background and stream progress")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--tune-iterations", sv.tune_iterations)->check(CLI::PositiveNumber);
  serve_cmd->add_option("--seed", sv.seed);
  serve_cmd->add_option("--address", sv.server.address);
  serve_cmd->add_option("--port", sv.server.port, "TCP port (0 picks one)");
  serve_cmd->add_option("--static-dir", sv.server.static_dir, "Directory served over HTTP")
      ->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--decimation", sv.decimation, "Broadcast every Nth step")
      ->check(CLI::PositiveNumber);
  serve_cmd->add_option("--run-for", sv.run_for, "Exit after this many seconds (0: until signal)")
      ->check(CLI::NonNegativeNumber);
  add_sim_flags(serve_cmd, sv.sim);

  std::vector<const char*> argv{"softorgan"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*voxelize_cmd) return cmd_voxelize(vox, out, err);
    if (*simulate_cmd) return cmd_simulate(sim, out, err);
    if (*fit_cmd) return cmd_fit(fit, out, err);
    if (*tune_cmd) return cmd_tune(tn, out, err);
    if (*serve_cmd) return cmd_serve(sv, out, err);
  } catch (const InstabilityRisk& e) {
    err << "error: " << e.what() << '\n';
    return kUnstable;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace softorgan::cli
