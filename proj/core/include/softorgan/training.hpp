#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "softorgan/dynamics.hpp"
#include "softorgan/lattice.hpp"
#include "softorgan/mesh_io.hpp"
#include "softorgan/signal.hpp"

namespace softorgan {

// L0 * clamp(1 + amplitude_scale * m(t), eps, 2 - eps).
double eval_rest(const SpringConstraint& c, const ActuationSignal& signal, double amplitude_scale,
                 double t, double epsilon = 0.1);

// How keyframed mesh vertices become particle targets.
//  - InverseSkin: least-squares inversion of the skin weights, so a track
//    produced by skinning a simulated lattice maps back onto that lattice.
//  - NearestVertex: each particle copies the displacement of the mesh vertex
//    closest to it at bind time.
enum class AnchorMapping { InverseSkin, NearestVertex };

// Particle target trajectories sampled on the keyframe clock. Same boundary
// rules as KeyframeTrack (wrap on period, else hold).
class ParticleTargets {
 public:
  ParticleTargets() = default;
  ParticleTargets(const KeyframeTrack& track, const TriMesh& mesh, const Lattice& lattice,
                  const SkinBinding& binding, AnchorMapping mapping);

  void positions(double t, std::vector<Vec3>& out) const;
  // Piecewise-constant velocity of the linear interpolation.
  void velocities(double t, std::vector<Vec3>& out) const;

  const KeyframeTrack& track() const { return targets_; }
  std::size_t particle_count() const { return targets_.width(); }

 private:
  KeyframeTrack targets_;
};

// For each particle, the mesh vertex nearest to it at bind time.
std::vector<std::uint32_t> nearest_vertices(const TriMesh& mesh, const Lattice& lattice);

struct Anchor {
  std::uint32_t vertex = 0;  // bind-time nearest mesh vertex
  double stiffness = 0.0;    // N/m
  double damping = 0.0;      // N s/m
};

// Per-step samples of every constraint length and every anchor force.
struct TrainingRecording {
  double sample_rate = 0.0;      // Hz (1 / dt)
  double start_time = 0.0;       // time of sample 0, s
  std::size_t transient_samples = 0;
  std::size_t period_samples = 0;
  std::size_t constraint_count = 0;
  std::size_t particle_count = 0;
  std::vector<double> lengths;       // [sample][constraint]
  std::vector<Vec3> anchor_forces;   // [sample][particle]

  std::size_t sample_count = 0;

  std::size_t samples() const { return sample_count; }
  // Post-transient samples covering a whole number of periods.
  std::size_t usable_samples() const;
  double length(std::size_t sample, std::size_t constraint) const {
    return lengths[sample * constraint_count + constraint];
  }
  const Vec3& anchor_force(std::size_t sample, std::size_t particle) const {
    return anchor_forces[sample * particle_count + particle];
  }
};

struct TrainingCoupling {
  std::vector<Anchor> anchors;  // one per particle
  ParticleTargets targets;
  double stiffness = 0.0;
  double damping = 0.0;
  TrainingRecording recording;

  // Stiff zero-length springs from each particle to its moving target.
  ForceFn force_fn() const;
  Vec3 anchor_force(const Particle& p, const Vec3& target, const Vec3& target_velocity) const;
};

// Throws MissingBinding when `binding` is null or built for another mesh.
TrainingCoupling couple_to_keyframes(const Lattice& lattice, const KeyframeTrack& track,
                                     const TriMesh& mesh, const SkinBinding* binding,
                                     double stiffness, double damping,
                                     AnchorMapping mapping = AnchorMapping::InverseSkin);

// Steps the coupled lattice for `duration` seconds with passive springs (or
// `rest` when given) and fills coupling.recording. The first motion period is
// marked transient.
void record_training_run(SimState& state, TrainingCoupling& coupling, const SimConfig& cfg,
                         double duration, const RestLengthFn& rest = passive_rest());

struct SignalFit {
  ActuationSignal signal;
  double residual = 0.0;
};

// Peak-picks the K strongest non-DC DFT bins of `series` (sampled at
// sample_rate, sample 0 at time t0). Phases are referred to absolute time.
SignalFit fit_signal(std::span<const double> series, double sample_rate, int harmonics,
                     double t0 = 0.0);

// Plain O(N^2) DFT bin k of a real series.
std::complex<double> dft_bin(std::span<const double> series, std::size_t k);

struct RegionFit {
  int id = 0;
  std::string name;
  ActuationSignal signal;
  double residual = 0.0;
  bool skipped = false;
};

struct FitReport {
  std::vector<RegionFit> regions;
  double residual = 0.0;  // RMS over fitted regions
  std::size_t samples_used = 0;
  std::vector<std::string> warnings;
};

// Mean relative-length series (l / L0 - 1) per region over its usable
// recording window; region `id` of the lattice sees its constraints only.
std::vector<double> region_relative_series(const TrainingRecording& rec, const Lattice& lattice,
                                           int region);

// Fits every region's mean series and writes the result into lattice.regions.
FitReport fit_regions(const TrainingCoupling& coupling, Lattice& lattice, int harmonics);

}  // namespace softorgan
