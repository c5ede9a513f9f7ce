#include "softorgan/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "softorgan/error.hpp"

namespace softorgan {

namespace {

// Half of the 26-neighbourhood; each unordered pair is visited once.
constexpr std::array<std::array<int, 3>, 13> kForwardOffsets{{
    {1, 0, 0},  {0, 1, 0},  {0, 0, 1},  {1, 1, 0},  {1, -1, 0}, {1, 0, 1},  {1, 0, -1},
    {0, 1, 1},  {0, 1, -1}, {1, 1, 1},  {1, 1, -1}, {1, -1, 1}, {1, -1, -1},
}};

int cell_index(double u, int dim) {
  // Ties on an interior boundary go to the lower cell.
  const int idx = static_cast<int>(std::ceil(u)) - 1;
  return std::clamp(idx, 0, dim - 1);
}

}  // namespace

Vec3 VoxelGrid::cell_center(const CellCoord& c) const {
  return origin + cell_size * Vec3(c.x + 0.5, c.y + 0.5, c.z + 0.5);
}

std::optional<std::size_t> VoxelGrid::find(const CellCoord& c) const {
  auto it = std::lower_bound(occupied.begin(), occupied.end(), c);
  if (it == occupied.end() || *it != c) return std::nullopt;
  return static_cast<std::size_t>(it - occupied.begin());
}

VoxelGrid voxelize(const TriMesh& mesh, int resolution) {
  if (resolution < 1) throw PreconditionError("resolution must be >= 1");
  if (mesh.vertices.empty()) throw DegenerateMesh("mesh has no vertices");
  const Aabb box = bounding_box(mesh.vertices);
  const Vec3 extent = box.extent();
  const double longest = extent.maxCoeff();
  if (!(longest > 0.0)) throw DegenerateMesh("bounding box has zero extent on all axes");

  VoxelGrid grid;
  grid.origin = box.min;
  grid.cell_size = longest / resolution;
  for (int a = 0; a < 3; ++a) {
    const double cells = extent[a] / grid.cell_size;
    grid.dims[a] = std::max(1, static_cast<int>(std::ceil(cells - 1e-9)));
  }

  std::vector<CellCoord> vertex_cells;
  vertex_cells.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) {
    const Vec3 u = (v - grid.origin) / grid.cell_size;
    vertex_cells.push_back({cell_index(u.x(), grid.dims[0]), cell_index(u.y(), grid.dims[1]),
                            cell_index(u.z(), grid.dims[2])});
  }
  grid.occupied = vertex_cells;
  std::sort(grid.occupied.begin(), grid.occupied.end());
  grid.occupied.erase(std::unique(grid.occupied.begin(), grid.occupied.end()),
                      grid.occupied.end());
  grid.vertex_cell.reserve(vertex_cells.size());
  for (const auto& c : vertex_cells) {
    grid.vertex_cell.push_back(static_cast<std::uint32_t>(*grid.find(c)));
  }
  return grid;
}

bool RegionRule::matches(const VoxelGrid& grid, const CellCoord& cell) const {
  if (std::find(cells.begin(), cells.end(), cell) != cells.end()) return true;
  if (!box) return false;
  const Vec3 c = grid.cell_center(cell);
  const auto& [lo, hi] = *box;
  return (c.array() >= lo.array()).all() && (c.array() <= hi.array()).all();
}

RegionAssignment assign_regions(const VoxelGrid& grid, const RegionSpec& spec) {
  RegionAssignment out;
  auto make_region = [](int id, const RegionRule& rule) {
    Region r;
    r.id = id;
    r.name = rule.name;
    r.actuation = rule.actuation;
    r.stiffness_scale = rule.stiffness_scale;
    r.pinned = rule.pinned;
    r.amplitude_scale = rule.pinned ? 0.0 : rule.amplitude_scale;
    if (r.stiffness_scale < 0.0 || r.amplitude_scale < 0.0) {
      throw ValidationError("region '" + rule.name + "': scales must be >= 0");
    }
    return r;
  };
  for (std::size_t k = 0; k < spec.rules.size(); ++k) {
    out.regions.push_back(make_region(static_cast<int>(k), spec.rules[k]));
  }
  out.regions.push_back(make_region(static_cast<int>(spec.rules.size()), spec.fallback));

  for (const auto& cell : grid.occupied) {
    std::size_t target = spec.rules.size();
    for (std::size_t k = 0; k < spec.rules.size(); ++k) {
      if (spec.rules[k].matches(grid, cell)) {
        target = k;
        break;
      }
    }
    out.regions[target].cells.push_back(cell);
  }
  for (const auto& r : out.regions) {
    if (r.cells.empty()) out.warnings.push_back("region '" + r.name + "' is empty");
  }
  return out;
}

std::vector<Vec3> Lattice::positions() const {
  std::vector<Vec3> out;
  out.reserve(particles.size());
  for (const auto& p : particles) out.push_back(p.position);
  return out;
}

Lattice build_lattice(const VoxelGrid& grid, std::vector<Region> regions,
                      const Material& material) {
  if (!(material.stiffness > 0.0) || !(material.particle_mass > 0.0) ||
      !(material.damping >= 0.0)) {
    throw PreconditionError("material stiffness and mass must be > 0, damping >= 0");
  }
  std::vector<int> cell_region(grid.occupied.size(), -1);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    if (regions[r].id != static_cast<int>(r)) {
      throw PartitionError("region ids must equal their list position");
    }
    for (const auto& cell : regions[r].cells) {
      const auto idx = grid.find(cell);
      if (!idx) throw PartitionError("region '" + regions[r].name + "' holds an unoccupied cell");
      if (cell_region[*idx] != -1) {
        throw PartitionError("cell claimed by regions " + std::to_string(cell_region[*idx]) +
                             " and " + std::to_string(r));
      }
      cell_region[*idx] = static_cast<int>(r);
    }
  }
  if (std::find(cell_region.begin(), cell_region.end(), -1) != cell_region.end()) {
    throw PartitionError("regions do not cover every occupied cell");
  }

  Lattice lat;
  lat.cell_size = grid.cell_size;
  lat.particle_cell = grid.occupied;
  lat.particle_region = cell_region;
  const double inv_mass = 1.0 / material.particle_mass;
  lat.particles.reserve(grid.occupied.size());
  for (std::size_t i = 0; i < grid.occupied.size(); ++i) {
    const bool pinned = regions[cell_region[i]].pinned;
    lat.particles.push_back({grid.cell_center(grid.occupied[i]), Vec3::Zero(),
                             pinned ? 0.0 : inv_mass});
  }

  for (std::size_t a = 0; a < grid.occupied.size(); ++a) {
    const auto& c = grid.occupied[a];
    for (const auto& off : kForwardOffsets) {
      const auto b = grid.find({c.x + off[0], c.y + off[1], c.z + off[2]});
      if (!b) continue;
      const auto i = static_cast<std::uint32_t>(std::min(a, *b));
      const auto j = static_cast<std::uint32_t>(std::max(a, *b));
      const double scale = 0.5 * (regions[cell_region[i]].stiffness_scale +
                                  regions[cell_region[j]].stiffness_scale);
      // A spring between two zero-stiffness regions exerts nothing; omit it.
      if (!(scale > 0.0)) continue;
      lat.constraints.push_back({i, j,
                                 (lat.particles[i].position - lat.particles[j].position).norm(),
                                 material.stiffness * scale, material.damping,
                                 cell_region[i]});
    }
  }
  std::sort(lat.constraints.begin(), lat.constraints.end(),
            [](const SpringConstraint& l, const SpringConstraint& r) {
              return std::tie(l.i, l.j) < std::tie(r.i, r.j);
            });
  lat.regions = std::move(regions);
  return lat;
}

void SkinBinding::validate(std::size_t particle_count) const {
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    const auto& vb = vertices[v];
    if (vb.count == 0 || vb.count > kMaxInfluences) {
      throw ValidationError("vertex " + std::to_string(v) + " has no skin influences");
    }
    double sum = 0.0;
    for (const auto& inf : vb.active()) {
      if (inf.particle >= particle_count) {
        throw ValidationError("vertex " + std::to_string(v) + " references a missing particle");
      }
      if (inf.weight < 0.0) throw ValidationError("negative skin weight");
      sum += inf.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("skin weights of vertex " + std::to_string(v) + " do not sum to 1");
    }
  }
}

SkinBinding bind_skin(const TriMesh& mesh, const Lattice& lattice) {
  const auto np = lattice.particles.size();
  if (np == 0) throw PreconditionError("cannot bind a skin to an empty lattice");
  const auto k = std::min(kMaxInfluences, np);

  SkinBinding binding;
  binding.vertices.resize(mesh.vertices.size());
  std::vector<std::pair<double, std::uint32_t>> dist(np);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Vec3& x = mesh.vertices[v];
    for (std::size_t p = 0; p < np; ++p) {
      dist[p] = {(x - lattice.particles[p].position).norm(), static_cast<std::uint32_t>(p)};
    }
    // Pair ordering breaks distance ties by particle index.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    auto& vb = binding.vertices[v];
    vb.count = static_cast<std::uint32_t>(k);
    double total = 0.0;
    for (std::size_t n = 0; n < k; ++n) {
      const double w = 1.0 / (dist[n].first + kSkinEpsilon);
      vb.influences[n] = {dist[n].second, w};
      total += w;
    }
    Vec3 centroid = Vec3::Zero();
    for (std::size_t n = 0; n < k; ++n) {
      vb.influences[n].weight /= total;
      centroid += vb.influences[n].weight * lattice.particles[vb.influences[n].particle].position;
    }
    vb.offset = x - centroid;
  }
  return binding;
}

void skin_positions(const SkinBinding& binding, std::span<const Vec3> particle_positions,
                    std::vector<Vec3>& out) {
  out.resize(binding.vertices.size());
  for (std::size_t v = 0; v < binding.vertices.size(); ++v) {
    const auto& vb = binding.vertices[v];
    Vec3 x = Vec3::Zero();
    for (const auto& inf : vb.active()) x += inf.weight * particle_positions[inf.particle];
    out[v] = x + vb.offset;
  }
}

TriMesh skin_update(const SkinBinding& binding, const Lattice& lattice, const TriMesh& mesh) {
  TriMesh out;
  out.name = mesh.name;
  out.triangles = mesh.triangles;
  const auto pos = lattice.positions();
  skin_positions(binding, pos, out.vertices);
  return out;
}

}  // namespace softorgan
