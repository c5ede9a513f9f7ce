#include "softorgan/synth.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "softorgan/error.hpp"

namespace softorgan::synth {

TriMesh box(const Vec3& min, const Vec3& max, const std::string& name) {
  TriMesh m;
  m.name = name;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? max.x() : min.x(), (i & 2) ? max.y() : min.y(),
                            (i & 4) ? max.z() : min.z());
  }
  // Outward-facing quads, fanned into triangles.
  const std::array<std::array<std::uint32_t, 4>, 6> quads{{
      {0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5},
  }};
  for (const auto& q : quads) {
    m.triangles.push_back({q[0], q[1], q[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
  }
  return m;
}

TriMesh subdivided_box(const Vec3& min, const Vec3& max, int n, const std::string& name) {
  if (n < 1) throw PreconditionError("subdivision must be >= 1");
  TriMesh m;
  m.name = name;
  std::map<std::array<int, 3>, std::uint32_t> index;
  auto vertex = [&](int i, int j, int k) {
    const std::array<int, 3> key{i, j, k};
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    const Vec3 u(static_cast<double>(i) / n, static_cast<double>(j) / n,
                 static_cast<double>(k) / n);
    const auto id = static_cast<std::uint32_t>(m.vertices.size());
    m.vertices.push_back(min + (max - min).cwiseProduct(u));
    index.emplace(key, id);
    return id;
  };
  auto quad = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
    m.triangles.push_back({a, b, c});
    m.triangles.push_back({a, c, d});
  };
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      quad(vertex(a, b, 0), vertex(a, b + 1, 0), vertex(a + 1, b + 1, 0), vertex(a + 1, b, 0));
      quad(vertex(a, b, n), vertex(a + 1, b, n), vertex(a + 1, b + 1, n), vertex(a, b + 1, n));
      quad(vertex(a, 0, b), vertex(a + 1, 0, b), vertex(a + 1, 0, b + 1), vertex(a, 0, b + 1));
      quad(vertex(a, n, b), vertex(a, n, b + 1), vertex(a + 1, n, b + 1), vertex(a + 1, n, b));
      quad(vertex(0, a, b), vertex(0, a, b + 1), vertex(0, a + 1, b + 1), vertex(0, a + 1, b));
      quad(vertex(n, a, b), vertex(n, a + 1, b), vertex(n, a + 1, b + 1), vertex(n, a, b + 1));
    }
  }
  return m;
}

TriMesh organ(int rings, int segments, const Vec3& radii) {
  if (rings < 2 || segments < 3) throw PreconditionError("organ needs rings >= 2, segments >= 3");
  TriMesh m;
  m.name = "organ";
  const double pi = std::numbers::pi;
  m.vertices.emplace_back(0.0, 0.0, radii.z());  // base pole
  for (int r = 1; r < rings; ++r) {
    const double theta = pi * r / rings;
    const double taper = 1.0 - 0.35 * (theta / pi) * (theta / pi);
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * pi * s / segments;
      const double lean = 0.12 * radii.x() * std::sin(theta) * std::sin(theta);
      m.vertices.emplace_back(radii.x() * std::sin(theta) * std::cos(phi) * taper + lean,
                              radii.y() * std::sin(theta) * std::sin(phi) * taper,
                              radii.z() * std::cos(theta));
    }
  }
  m.vertices.emplace_back(0.0, 0.0, -radii.z());  // apex
  const auto ring = [&](int r, int s) {
    return static_cast<std::uint32_t>(1 + (r - 1) * segments + (s % segments));
  };
  const auto apex = static_cast<std::uint32_t>(m.vertices.size() - 1);
  for (int s = 0; s < segments; ++s) m.triangles.push_back({0, ring(1, s), ring(1, s + 1)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      m.triangles.push_back({ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)});
      m.triangles.push_back({ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)});
    }
  }
  for (int s = 0; s < segments; ++s) {
    m.triangles.push_back({ring(rings - 1, s), apex, ring(rings - 1, s + 1)});
  }
  return m;
}

KeyframeTrack breathing_track(const TriMesh& mesh, const Vec3& center, double amplitude,
                              double frequency, double fps, double seconds) {
  KeyframeTrack track;
  track.fps = fps;
  const auto frames = static_cast<std::size_t>(std::llround(seconds * fps));
  track.frames.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = static_cast<double>(k) / fps;
    const double s = 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * frequency * t);
    std::vector<Vec3> frame;
    frame.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) frame.push_back(center + s * (v - center));
    track.frames.push_back(std::move(frame));
  }
  const double period = fps / frequency;
  if (std::abs(period - std::round(period)) < 1e-9 && period <= static_cast<double>(frames)) {
    track.period_frames = static_cast<int>(std::lround(period));
  }
  track.validate();
  return track;
}

KeyframeTrack simulated_track(const TriMesh& mesh, const Lattice& lattice, const SimConfig& cfg,
                              double fps, double seconds, std::optional<int> period_frames) {
  const double per_frame = 1.0 / (fps * cfg.dt);
  const auto steps_per_frame = static_cast<std::size_t>(std::llround(per_frame));
  if (steps_per_frame == 0 || std::abs(per_frame - static_cast<double>(steps_per_frame)) > 1e-9) {
    throw PreconditionError("frame interval must be a whole number of steps");
  }
  check_stability(cfg, lattice);
  const auto binding = bind_skin(mesh, lattice);
  const auto rest = region_actuation(cfg.rest_clamp_epsilon);

  KeyframeTrack track;
  track.fps = fps;
  track.period_frames = period_frames;
  SimState state;
  state.lattice = lattice;
  const auto frames = static_cast<std::size_t>(std::llround(seconds * fps));
  std::vector<Vec3> skinned;
  for (std::size_t k = 0; k < frames; ++k) {
    if (k > 0) {
      for (std::size_t s = 0; s < steps_per_frame; ++s) step(state, cfg, rest);
    }
    const auto pos = state.lattice.positions();
    skin_positions(binding, pos, skinned);
    track.frames.push_back(skinned);
  }
  track.validate();
  return track;
}

}  // namespace softorgan::synth
