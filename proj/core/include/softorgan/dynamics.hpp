#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "softorgan/lattice.hpp"

namespace softorgan {

struct SimConfig {
  double dt = 1.0 / 240.0;       // s, one step
  int substeps = 1;
  Vec3 gravity = Vec3::Zero();   // m/s^2
  double global_damping = 0.0;   // 1/s
  double rest_clamp_epsilon = 0.1;

  double substep() const { return dt / substeps; }
  void validate() const;  // throws PreconditionError
};

inline constexpr double kStabilityLimit = 0.3;
inline constexpr double kMaxSpeed = 1e6;       // m/s
inline constexpr double kSingularLength = 1e-9;  // m

// h * sqrt(k_max * max inverse mass), where k_max is the stiffest spring plus
// any extra stiffness acting on a single particle (training anchors).
double stability_number(const SimConfig& cfg, const Lattice& lattice, double extra_stiffness = 0.0);

// Throws InstabilityRisk when stability_number >= kStabilityLimit.
void check_stability(const SimConfig& cfg, const Lattice& lattice, double extra_stiffness = 0.0);

struct ExternalForce {
  std::uint32_t particle = 0;
  Vec3 force = Vec3::Zero();  // N
  double expiry = 0.0;        // s
};

struct SimState {
  Lattice lattice;
  double time = 0.0;
  std::uint64_t step = 0;
  std::vector<ExternalForce> external_forces;
  bool halted = false;
};

// Writes the (unclamped) rest length of every constraint at time t.
using RestLengthFn = std::function<void(const Lattice&, double t, std::span<double> rest)>;
// Adds extra forces (N) into `forces` for the substep starting at time t.
using ForceFn = std::function<void(const SimState&, double t, std::span<Vec3> forces)>;

// rest = L0.
RestLengthFn passive_rest();
// rest = L0 * rest_factor(region signal, region amplitude_scale, t, epsilon).
RestLengthFn region_actuation(double epsilon);

// Force on particle i; the force on j is its negation.
Vec3 constraint_force(const SpringConstraint& c, const Particle& pi, const Particle& pj,
                      double rest);

// Advances state by cfg.dt using cfg.substeps symplectic Euler substeps.
// Throws InstabilityDetected (state.halted set, state at last good substep).
void step(SimState& state, const SimConfig& cfg, const RestLengthFn& rest,
          const ForceFn& extra = {});

// Linear falloff: every particle closer than radius gets force * (1 - d/radius)
// until time + duration.
void apply_poke(SimState& state, const Vec3& point, const Vec3& force, double radius,
                double duration);

double mechanical_energy(const SimState& state, std::span<const double> rest, const Vec3& gravity);
double mechanical_energy(const SimState& state, const SimConfig& cfg, const RestLengthFn& rest);

Vec3 total_momentum(const SimState& state);

// Rest lengths the stepper would use at time t, clamp included.
std::vector<double> current_rest_lengths(const Lattice& lattice, const SimConfig& cfg,
                                         const RestLengthFn& rest, double t);

}  // namespace softorgan
