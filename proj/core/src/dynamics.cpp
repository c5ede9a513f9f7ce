#include "softorgan/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "softorgan/error.hpp"

namespace softorgan {

namespace {

void clamp_rest(const Lattice& lattice, double epsilon, std::span<double> rest) {
  for (std::size_t c = 0; c < rest.size(); ++c) {
    const double l0 = lattice.constraints[c].rest_length0;
    rest[c] = std::clamp(rest[c], epsilon * l0, (2.0 - epsilon) * l0);
  }
}

}  // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("dt must be > 0");
  if (substeps < 1) throw PreconditionError("substeps must be >= 1");
  if (!(global_damping >= 0.0)) throw PreconditionError("global_damping must be >= 0");
  if (!(rest_clamp_epsilon > 0.0 && rest_clamp_epsilon < 1.0)) {
    throw PreconditionError("rest_clamp_epsilon must lie in (0, 1)");
  }
  if (!gravity.allFinite()) throw PreconditionError("gravity must be finite");
}

double stability_number(const SimConfig& cfg, const Lattice& lattice, double extra_stiffness) {
  double k_max = 0.0;
  for (const auto& c : lattice.constraints) k_max = std::max(k_max, c.stiffness);
  double inv_mass = 0.0;
  for (const auto& p : lattice.particles) inv_mass = std::max(inv_mass, p.inverse_mass);
  return cfg.substep() * std::sqrt((k_max + extra_stiffness) * inv_mass);
}

void check_stability(const SimConfig& cfg, const Lattice& lattice, double extra_stiffness) {
  cfg.validate();
  const double s = stability_number(cfg, lattice, extra_stiffness);
  if (!(s < kStabilityLimit)) {
    std::ostringstream msg;
    msg << "h*sqrt(k*inv_mass) = " << s << " >= " << kStabilityLimit
        << "; raise substeps or lower dt";
    throw InstabilityRisk(msg.str());
  }
}

RestLengthFn passive_rest() {
  return [](const Lattice& lattice, double, std::span<double> rest) {
    for (std::size_t c = 0; c < rest.size(); ++c) rest[c] = lattice.constraints[c].rest_length0;
  };
}

RestLengthFn region_actuation(double epsilon) {
  return [epsilon](const Lattice& lattice, double t, std::span<double> rest) {
    thread_local std::vector<double> factor;
    factor.resize(lattice.regions.size());
    for (std::size_t r = 0; r < lattice.regions.size(); ++r) {
      const auto& region = lattice.regions[r];
      factor[r] = rest_factor(region.actuation, region.amplitude_scale, t, epsilon);
    }
    for (std::size_t c = 0; c < rest.size(); ++c) {
      const auto& con = lattice.constraints[c];
      rest[c] = con.rest_length0 * factor[static_cast<std::size_t>(con.region)];
    }
  };
}

Vec3 constraint_force(const SpringConstraint& c, const Particle& pi, const Particle& pj,
                      double rest) {
  const Vec3 d = pi.position - pj.position;
  const double len = d.norm();
  if (len < kSingularLength) return Vec3::Zero();
  const Vec3 dir = d / len;
  const double v_rel = (pi.velocity - pj.velocity).dot(dir);
  return (-c.stiffness * (len - rest) - c.damping * v_rel) * dir;
}

std::vector<double> current_rest_lengths(const Lattice& lattice, const SimConfig& cfg,
                                         const RestLengthFn& rest, double t) {
  std::vector<double> out(lattice.constraints.size());
  rest(lattice, t, out);
  clamp_rest(lattice, cfg.rest_clamp_epsilon, out);
  return out;
}

void step(SimState& state, const SimConfig& cfg, const RestLengthFn& rest, const ForceFn& extra) {
  if (state.halted) throw InstabilityDetected("simulation is halted");
  auto& lat = state.lattice;
  const std::size_t np = lat.particles.size();
  const std::size_t nc = lat.constraints.size();
  const double h = cfg.substep();
  const double decay = std::max(0.0, 1.0 - h * cfg.global_damping);

  std::erase_if(state.external_forces,
                [&](const ExternalForce& f) { return f.expiry <= state.time; });

  thread_local std::vector<Vec3> forces;
  thread_local std::vector<double> rest_len;
  forces.resize(np);
  rest_len.resize(nc);

  for (int s = 0; s < cfg.substeps; ++s) {
    const double t = state.time + s * h;
    std::fill(forces.begin(), forces.end(), Vec3::Zero());
    if (!cfg.gravity.isZero()) {
      for (std::size_t p = 0; p < np; ++p) {
        const double im = lat.particles[p].inverse_mass;
        if (im > 0.0) forces[p] += cfg.gravity / im;
      }
    }
    for (const auto& f : state.external_forces) {
      if (t < f.expiry) forces[f.particle] += f.force;
    }
    rest(lat, t, rest_len);
    clamp_rest(lat, cfg.rest_clamp_epsilon, rest_len);
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& con = lat.constraints[c];
      const Vec3 f = constraint_force(con, lat.particles[con.i], lat.particles[con.j], rest_len[c]);
      forces[con.i] += f;
      forces[con.j] -= f;
    }
    if (extra) extra(state, t, forces);

    // Check before committing so a blow-up never leaves NaN in the state.
    for (std::size_t p = 0; p < np; ++p) {
      const auto& part = lat.particles[p];
      if (part.inverse_mass == 0.0) continue;
      const Vec3 v = (part.velocity + h * part.inverse_mass * forces[p]) * decay;
      const Vec3 x = part.position + h * v;
      if (!v.allFinite() || !x.allFinite() || v.norm() > kMaxSpeed) {
        state.halted = true;
        std::ostringstream msg;
        msg << "instability at t=" << t << " s: particle " << p << " speed " << v.norm();
        throw InstabilityDetected(msg.str());
      }
    }
    for (std::size_t p = 0; p < np; ++p) {
      auto& part = lat.particles[p];
      if (part.inverse_mass == 0.0) continue;
      part.velocity = (part.velocity + h * part.inverse_mass * forces[p]) * decay;
      part.position += h * part.velocity;
    }
  }
  ++state.step;
  state.time += cfg.dt;
}

void apply_poke(SimState& state, const Vec3& point, const Vec3& force, double radius,
                double duration) {
  if (!(radius > 0.0) || !(duration > 0.0)) {
    throw PreconditionError("poke radius and duration must be > 0");
  }
  const auto& particles = state.lattice.particles;
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const double d = (particles[p].position - point).norm();
    if (d < radius) {
      state.external_forces.push_back(
          {static_cast<std::uint32_t>(p), force * (1.0 - d / radius), state.time + duration});
    }
  }
}

double mechanical_energy(const SimState& state, std::span<const double> rest, const Vec3& gravity) {
  const auto& lat = state.lattice;
  double e = 0.0;
  for (const auto& p : lat.particles) {
    if (p.inverse_mass == 0.0) continue;
    const double m = 1.0 / p.inverse_mass;
    e += 0.5 * m * p.velocity.squaredNorm();
    e -= m * gravity.dot(p.position);
  }
  for (std::size_t c = 0; c < lat.constraints.size(); ++c) {
    const auto& con = lat.constraints[c];
    const double ext =
        (lat.particles[con.i].position - lat.particles[con.j].position).norm() - rest[c];
    e += 0.5 * con.stiffness * ext * ext;
  }
  return e;
}

double mechanical_energy(const SimState& state, const SimConfig& cfg, const RestLengthFn& rest) {
  const auto r = current_rest_lengths(state.lattice, cfg, rest, state.time);
  return mechanical_energy(state, r, cfg.gravity);
}

Vec3 total_momentum(const SimState& state) {
  Vec3 p = Vec3::Zero();
  for (const auto& part : state.lattice.particles) {
    if (part.inverse_mass > 0.0) p += part.velocity / part.inverse_mass;
  }
  return p;
}

}  // namespace softorgan
