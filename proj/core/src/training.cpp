#include "softorgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "softorgan/error.hpp"

namespace softorgan {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Bins weaker than this are treated as absent.
constexpr double kAmplitudeFloor = 1e-12;

std::vector<std::vector<Vec3>> inverse_skin_targets(const KeyframeTrack& track, const TriMesh& mesh,
                                                    const Lattice& lattice,
                                                    const SkinBinding& binding) {
  const auto nv = static_cast<Eigen::Index>(mesh.vertices.size());
  const auto np = static_cast<Eigen::Index>(lattice.particles.size());

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(mesh.vertices.size() * kMaxInfluences);
  for (Eigen::Index v = 0; v < nv; ++v) {
    for (const auto& inf : binding.vertices[static_cast<std::size_t>(v)].active()) {
      entries.emplace_back(v, static_cast<Eigen::Index>(inf.particle), inf.weight);
    }
  }
  Eigen::SparseMatrix<double> w(nv, np);
  w.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseMatrix<double> normal = w.transpose() * w;

  // Light Tikhonov term keeps particles no vertex sees well-posed.
  double mean_diag = 0.0;
  for (Eigen::Index p = 0; p < np; ++p) mean_diag += normal.coeff(p, p);
  mean_diag /= static_cast<double>(np);
  Eigen::SparseMatrix<double> reg(np, np);
  reg.setIdentity();
  normal += (1e-9 * mean_diag) * reg;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
  if (solver.info() != Eigen::Success) throw ValidationError("inverse skin solve failed");

  const auto nf = static_cast<Eigen::Index>(track.frames.size());
  Eigen::MatrixXd disp(nv, 3 * nf);
  for (Eigen::Index k = 0; k < nf; ++k) {
    const auto& frame = track.frames[static_cast<std::size_t>(k)];
    for (Eigen::Index v = 0; v < nv; ++v) {
      disp.block<1, 3>(v, 3 * k) =
          (frame[static_cast<std::size_t>(v)] - mesh.vertices[static_cast<std::size_t>(v)])
              .transpose();
    }
  }
  const Eigen::MatrixXd rhs = w.transpose() * disp;
  const Eigen::MatrixXd sol = solver.solve(rhs);

  std::vector<std::vector<Vec3>> out(static_cast<std::size_t>(nf));
  for (Eigen::Index k = 0; k < nf; ++k) {
    auto& frame = out[static_cast<std::size_t>(k)];
    frame.resize(static_cast<std::size_t>(np));
    for (Eigen::Index p = 0; p < np; ++p) {
      frame[static_cast<std::size_t>(p)] =
          lattice.particles[static_cast<std::size_t>(p)].position +
          sol.block<1, 3>(p, 3 * k).transpose();
    }
  }
  return out;
}

}  // namespace

double eval_rest(const SpringConstraint& c, const ActuationSignal& signal, double amplitude_scale,
                 double t, double epsilon) {
  return c.rest_length0 * rest_factor(signal, amplitude_scale, t, epsilon);
}

std::vector<std::uint32_t> nearest_vertices(const TriMesh& mesh, const Lattice& lattice) {
  std::vector<std::uint32_t> out(lattice.particles.size());
  for (std::size_t p = 0; p < lattice.particles.size(); ++p) {
    const Vec3& x = lattice.particles[p].position;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      const double d = (mesh.vertices[v] - x).squaredNorm();
      if (d < best) {
        best = d;
        out[p] = static_cast<std::uint32_t>(v);
      }
    }
  }
  return out;
}

ParticleTargets::ParticleTargets(const KeyframeTrack& track, const TriMesh& mesh,
                                 const Lattice& lattice, const SkinBinding& binding,
                                 AnchorMapping mapping) {
  targets_.fps = track.fps;
  targets_.period_frames = track.period_frames;
  if (mapping == AnchorMapping::InverseSkin) {
    targets_.frames = inverse_skin_targets(track, mesh, lattice, binding);
    return;
  }
  const auto nearest = nearest_vertices(mesh, lattice);
  targets_.frames.resize(track.frames.size());
  for (std::size_t k = 0; k < track.frames.size(); ++k) {
    auto& frame = targets_.frames[k];
    frame.resize(lattice.particles.size());
    for (std::size_t p = 0; p < frame.size(); ++p) {
      frame[p] = lattice.particles[p].position + track.frames[k][nearest[p]] -
                 mesh.vertices[nearest[p]];
    }
  }
}

void ParticleTargets::positions(double t, std::vector<Vec3>& out) const {
  const double f = targets_.frame_position(t);
  const auto k0 = static_cast<std::size_t>(std::floor(f));
  const auto k1 = std::min(k0 + 1, targets_.frames.size() - 1);
  const double u = f - static_cast<double>(k0);
  const auto& a = targets_.frames[k0];
  const auto& b = targets_.frames[k1];
  out.resize(a.size());
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = (1.0 - u) * a[p] + u * b[p];
}

void ParticleTargets::velocities(double t, std::vector<Vec3>& out) const {
  const auto& frames = targets_.frames;
  out.assign(frames.front().size(), Vec3::Zero());
  const double last = static_cast<double>(frames.size() - 1);
  // Holding the last frame means the target is at rest.
  if (!targets_.period_frames && t * targets_.fps >= last) return;
  const double f = targets_.frame_position(t);
  auto k0 = static_cast<std::size_t>(std::floor(f));
  if (k0 + 1 >= frames.size()) k0 = frames.size() - 2;
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = (frames[k0 + 1][p] - frames[k0][p]) * targets_.fps;
  }
}

std::size_t TrainingRecording::usable_samples() const {
  if (sample_count <= transient_samples) return 0;
  const std::size_t avail = sample_count - transient_samples;
  if (period_samples == 0) return avail;
  return (avail / period_samples) * period_samples;
}

Vec3 TrainingCoupling::anchor_force(const Particle& p, const Vec3& target,
                                    const Vec3& target_velocity) const {
  return -stiffness * (p.position - target) - damping * (p.velocity - target_velocity);
}

ForceFn TrainingCoupling::force_fn() const {
  return [this](const SimState& state, double t, std::span<Vec3> forces) {
    thread_local std::vector<Vec3> x_hat;
    thread_local std::vector<Vec3> v_hat;
    targets.positions(t, x_hat);
    targets.velocities(t, v_hat);
    const auto& particles = state.lattice.particles;
    for (std::size_t p = 0; p < particles.size(); ++p) {
      forces[p] += anchor_force(particles[p], x_hat[p], v_hat[p]);
    }
  };
}

TrainingCoupling couple_to_keyframes(const Lattice& lattice, const KeyframeTrack& track,
                                     const TriMesh& mesh, const SkinBinding* binding,
                                     double stiffness, double damping, AnchorMapping mapping) {
  if (binding == nullptr) throw MissingBinding("coupling needs a skin binding");
  if (binding->vertices.size() != mesh.vertices.size()) {
    throw MissingBinding("skin binding was built for a different mesh");
  }
  binding->validate(lattice.particles.size());
  if (!(stiffness > 0.0)) throw PreconditionError("coupling stiffness must be > 0");
  if (!(damping >= 0.0)) throw PreconditionError("coupling damping must be >= 0");
  track.validate();
  if (track.width() != mesh.vertices.size()) {
    throw WidthMismatch(mesh.vertices.size(), track.width());
  }

  TrainingCoupling coupling;
  coupling.stiffness = stiffness;
  coupling.damping = damping;
  const auto nearest = nearest_vertices(mesh, lattice);
  coupling.anchors.reserve(nearest.size());
  for (auto v : nearest) coupling.anchors.push_back({v, stiffness, damping});
  coupling.targets = ParticleTargets(track, mesh, lattice, *binding, mapping);
  return coupling;
}

void record_training_run(SimState& state, TrainingCoupling& coupling, const SimConfig& cfg,
                         double duration, const RestLengthFn& rest) {
  check_stability(cfg, state.lattice, coupling.stiffness);
  const auto steps = static_cast<std::size_t>(std::llround(duration / cfg.dt));
  const auto& track = coupling.targets.track();

  auto& rec = coupling.recording;
  rec = TrainingRecording{};
  rec.sample_rate = 1.0 / cfg.dt;
  rec.start_time = state.time + cfg.dt;
  rec.constraint_count = state.lattice.constraints.size();
  rec.particle_count = state.lattice.particles.size();
  if (track.period_frames) {
    rec.period_samples = static_cast<std::size_t>(std::llround(track.period_seconds() / cfg.dt));
    if (rec.period_samples == 0 || steps < 2 * rec.period_samples) {
      throw PreconditionError("training run must cover at least two motion periods");
    }
    rec.transient_samples = rec.period_samples;
  } else {
    if (steps < 2) throw PreconditionError("training run too short");
    rec.transient_samples = steps / 2;
  }

  rec.lengths.reserve(steps * rec.constraint_count);
  rec.anchor_forces.reserve(steps * rec.particle_count);
  const auto force = coupling.force_fn();
  std::vector<Vec3> x_hat;
  std::vector<Vec3> v_hat;
  for (std::size_t s = 0; s < steps; ++s) {
    step(state, cfg, rest, force);
    const auto& lat = state.lattice;
    for (const auto& c : lat.constraints) {
      rec.lengths.push_back((lat.particles[c.i].position - lat.particles[c.j].position).norm());
    }
    coupling.targets.positions(state.time, x_hat);
    coupling.targets.velocities(state.time, v_hat);
    for (std::size_t p = 0; p < lat.particles.size(); ++p) {
      rec.anchor_forces.push_back(coupling.anchor_force(lat.particles[p], x_hat[p], v_hat[p]));
    }
    ++rec.sample_count;
  }
}

std::complex<double> dft_bin(std::span<const double> series, std::size_t k) {
  const std::size_t n = series.size();
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Reduce k*i mod n first so the angle stays accurate for long series.
    const double angle = -kTwoPi * static_cast<double>((k * i) % n) / static_cast<double>(n);
    acc += series[i] * std::complex<double>(std::cos(angle), std::sin(angle));
  }
  return acc;
}

SignalFit fit_signal(std::span<const double> series, double sample_rate, int harmonics,
                     double t0) {
  if (harmonics < 1) throw PreconditionError("K must be >= 1");
  if (harmonics > static_cast<int>(kMaxHarmonics)) {
    throw PreconditionError("K must be <= " + std::to_string(kMaxHarmonics));
  }
  const std::size_t n = series.size();
  if (n < static_cast<std::size_t>(2 * harmonics + 1)) {
    throw TooFewSamples("need at least 2K+1 samples, got " + std::to_string(n));
  }
  if (!(sample_rate > 0.0)) throw PreconditionError("sample rate must be > 0");

  struct Bin {
    std::size_t k;
    double amplitude;
    double phase;
  };
  std::vector<Bin> bins;
  // The Nyquist bin of an even-length series cannot carry a sine; skip it.
  const std::size_t last = (n % 2 == 0) ? n / 2 - 1 : n / 2;
  for (std::size_t k = 1; k <= last; ++k) {
    const auto x = dft_bin(series, k);
    const double amp = 2.0 * std::abs(x) / static_cast<double>(n);
    if (amp <= kAmplitudeFloor) continue;
    bins.push_back({k, amp, std::arg(x) + std::numbers::pi / 2.0});
  }
  std::stable_sort(bins.begin(), bins.end(),
                   [](const Bin& a, const Bin& b) { return a.amplitude > b.amplitude; });
  if (bins.size() > static_cast<std::size_t>(harmonics)) bins.resize(harmonics);
  std::sort(bins.begin(), bins.end(), [](const Bin& a, const Bin& b) { return a.k < b.k; });

  SignalFit fit;
  const double bin_hz = sample_rate / static_cast<double>(n);
  for (const auto& b : bins) {
    const double f = static_cast<double>(b.k) * bin_hz;
    fit.signal.harmonics.push_back({b.amplitude, f, wrap_phase(b.phase - kTwoPi * f * t0)});
  }
  enforce_signal_invariants(fit.signal);

  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) / sample_rate;
    const double r = series[i] - fit.signal.value(t);
    sq += r * r;
  }
  fit.residual = std::sqrt(sq / static_cast<double>(n));
  return fit;
}

std::vector<double> region_relative_series(const TrainingRecording& rec, const Lattice& lattice,
                                           int region) {
  std::vector<std::size_t> members;
  for (std::size_t c = 0; c < lattice.constraints.size(); ++c) {
    if (lattice.constraints[c].region == region) members.push_back(c);
  }
  const std::size_t used = rec.usable_samples();
  if (members.empty() || used == 0) return {};
  std::vector<double> series(used, 0.0);
  for (std::size_t s = 0; s < used; ++s) {
    const std::size_t sample = rec.transient_samples + s;
    double acc = 0.0;
    for (auto c : members) acc += rec.length(sample, c) / lattice.constraints[c].rest_length0 - 1.0;
    series[s] = acc / static_cast<double>(members.size());
  }
  return series;
}

FitReport fit_regions(const TrainingCoupling& coupling, Lattice& lattice, int harmonics) {
  const auto& rec = coupling.recording;
  if (rec.samples() == 0) throw PreconditionError("no training recording to fit");
  if (rec.constraint_count != lattice.constraints.size()) {
    throw PreconditionError("recording does not match the lattice");
  }
  FitReport report;
  report.samples_used = rec.usable_samples();
  const double t0 = rec.start_time + static_cast<double>(rec.transient_samples) / rec.sample_rate;
  double sq = 0.0;
  std::size_t fitted = 0;
  for (auto& region : lattice.regions) {
    RegionFit rf;
    rf.id = region.id;
    rf.name = region.name;
    const auto series = region_relative_series(rec, lattice, region.id);
    if (series.empty()) {
      rf.skipped = true;
      rf.signal = region.actuation;
      report.warnings.push_back("region '" + region.name + "' has no constraints; skipped");
      report.regions.push_back(std::move(rf));
      continue;
    }
    auto fit = fit_signal(series, rec.sample_rate, harmonics, t0);
    rf.signal = fit.signal;
    rf.residual = fit.residual;
    region.actuation = fit.signal;
    sq += fit.residual * fit.residual;
    ++fitted;
    report.regions.push_back(std::move(rf));
  }
  report.residual = fitted ? std::sqrt(sq / static_cast<double>(fitted)) : 0.0;
  return report;
}

}  // namespace softorgan
