#pragma once

#include "softorgan/dynamics.hpp"
#include "softorgan/lattice.hpp"
#include "softorgan/mesh_io.hpp"

namespace softorgan::synth {

// Axis-aligned box surface: 8 vertices, 12 triangles.
TriMesh box(const Vec3& min, const Vec3& max, const std::string& name = "box");
inline TriMesh unit_cube() { return box(Vec3::Zero(), Vec3::Ones(), "cube"); }

// Box surface with each face split into n x n quads (two triangles each).
TriMesh subdivided_box(const Vec3& min, const Vec3& max, int n, const std::string& name = "box");

// Closed latitude/longitude surface with a heart-like asymmetry: an
// ellipsoid with a tapered apex and a broader base.
TriMesh organ(int rings = 24, int segments = 48, const Vec3& radii = Vec3(0.05, 0.045, 0.06));

// Every vertex scaled about `center` by 1 + amplitude * sin(2 pi f t).
// Covers `seconds` at `fps`; period_frames = fps / f when that is integral.
KeyframeTrack breathing_track(const TriMesh& mesh, const Vec3& center, double amplitude,
                              double frequency, double fps, double seconds);

// Runs the driven lattice (region signals from lattice.regions) from rest and
// records the skinned mesh at `fps` for `seconds` (frame 0 is the rest pose).
KeyframeTrack simulated_track(const TriMesh& mesh, const Lattice& lattice, const SimConfig& cfg,
                              double fps, double seconds, std::optional<int> period_frames);

}  // namespace softorgan::synth
