#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "softorgan/mesh_io.hpp"
#include "softorgan/signal.hpp"

namespace softorgan {

struct CellCoord {
  int x = 0;
  int y = 0;
  int z = 0;

  auto operator<=>(const CellCoord&) const = default;
};

// Vertex-occupancy voxelization of a mesh's bounding box.
struct VoxelGrid {
  Vec3 origin = Vec3::Zero();
  double cell_size = 1.0;
  std::array<int, 3> dims{1, 1, 1};
  std::vector<CellCoord> occupied;          // sorted ascending, unique
  std::vector<std::uint32_t> vertex_cell;   // mesh vertex -> index into occupied

  Vec3 cell_center(const CellCoord& c) const;
  std::optional<std::size_t> find(const CellCoord& c) const;
};

// cell_size = longest bounding-box extent / resolution. Vertices on a cell
// boundary belong to the lower cell; the max corner lands in the last cell.
VoxelGrid voxelize(const TriMesh& mesh, int resolution);

struct Region {
  int id = 0;
  std::string name;
  std::vector<CellCoord> cells;
  ActuationSignal actuation;
  double stiffness_scale = 1.0;
  double amplitude_scale = 1.0;
  bool pinned = false;
};

// One entry of a region spec. A cell matches when it is listed in `cells` or
// its center lies inside `box` (inclusive bounds).
struct RegionRule {
  std::string name;
  std::optional<std::array<Vec3, 2>> box;
  std::vector<CellCoord> cells;
  bool pinned = false;
  double stiffness_scale = 1.0;
  double amplitude_scale = 1.0;
  ActuationSignal actuation;

  bool matches(const VoxelGrid& grid, const CellCoord& cell) const;
};

struct RegionSpec {
  std::vector<RegionRule> rules;
  RegionRule fallback = default_rule();

  static RegionRule default_rule() {
    RegionRule r;
    r.name = "default";
    return r;
  }
};

struct RegionAssignment {
  std::vector<Region> regions;  // rules in order, then the fallback; id == index
  std::vector<std::string> warnings;
};

// First matching rule wins; unmatched cells go to the fallback region.
RegionAssignment assign_regions(const VoxelGrid& grid, const RegionSpec& spec);

struct Material {
  double stiffness = 100.0;   // N/m
  double damping = 0.5;       // N s/m
  double particle_mass = 0.1; // kg
};

struct Particle {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double inverse_mass = 0.0;
};

struct SpringConstraint {
  std::uint32_t i = 0;  // i < j
  std::uint32_t j = 0;
  double rest_length0 = 0.0;
  double stiffness = 0.0;
  double damping = 0.0;
  int region = 0;
};

struct Lattice {
  std::vector<Particle> particles;
  std::vector<SpringConstraint> constraints;
  std::vector<CellCoord> particle_cell;
  std::vector<int> particle_region;
  std::vector<Region> regions;  // id == index
  double cell_size = 1.0;

  std::vector<Vec3> positions() const;
  bool is_pinned(std::size_t particle) const { return particles[particle].inverse_mass == 0.0; }
};

// Throws PartitionError when regions do not partition the occupied cells and
// PreconditionError for non-positive material parameters.
Lattice build_lattice(const VoxelGrid& grid, std::vector<Region> regions,
                      const Material& material);

inline constexpr std::size_t kMaxInfluences = 4;

struct SkinInfluence {
  std::uint32_t particle = 0;
  double weight = 0.0;
};

struct VertexBinding {
  std::array<SkinInfluence, kMaxInfluences> influences{};
  std::uint32_t count = 0;  // influences sorted nearest first
  Vec3 offset = Vec3::Zero();

  std::span<const SkinInfluence> active() const { return {influences.data(), count}; }
};

struct SkinBinding {
  std::vector<VertexBinding> vertices;

  // Particle closest to the vertex at bind time.
  std::uint32_t nearest_particle(std::size_t vertex) const {
    return vertices[vertex].influences[0].particle;
  }
  // Throws ValidationError on dangling particles or weights off unity.
  void validate(std::size_t particle_count) const;
};

inline constexpr double kSkinEpsilon = 1e-9;

SkinBinding bind_skin(const TriMesh& mesh, const Lattice& lattice);

// x_v = sum_p w_p x_p + offset_v for every vertex.
void skin_positions(const SkinBinding& binding, std::span<const Vec3> particle_positions,
                    std::vector<Vec3>& out);
TriMesh skin_update(const SkinBinding& binding, const Lattice& lattice, const TriMesh& mesh);

}  // namespace softorgan
