#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "softorgan/lattice.hpp"
#include "softorgan/training.hpp"
#include "softorgan/tuner.hpp"

namespace softorgan {

using nlohmann::json;

json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const json& j, const std::string& what);

json signal_to_json(const ActuationSignal& s);  // [{"a","f","phi"}, ...]
ActuationSignal signal_from_json(const json& j);

json mesh_to_json(const TriMesh& mesh);
TriMesh mesh_from_json(const json& j);
json binding_to_json(const SkinBinding& binding);
SkinBinding binding_from_json(const json& j);
json regions_to_json(const std::vector<Region>& regions);  // without cells

// Region spec file: a JSON list of rules; the last entry with "box": null is
// the fallback region and is required.
RegionSpec region_spec_from_json(const json& j);
RegionSpec load_region_spec(const std::filesystem::path& path);

// Fitted-parameters file: {"regions": [{"id","name","harmonics","residual"}]}.
json params_to_json(const Lattice& lattice, const RegionParams& params,
                    const std::vector<double>& residuals = {});
json fit_report_to_json(const FitReport& report);
RegionParams params_from_json(const json& j, std::size_t region_count);
RegionParams load_params(const std::filesystem::path& path, std::size_t region_count);

json tune_report_to_json(const TuneReport& report, const Lattice& lattice);

// A voxelized scene on disk: mesh, resolution, material and regions with
// their cells. Loading rebuilds the lattice and checks the recorded counts.
struct LatticePackage {
  TriMesh mesh;
  int resolution = 1;
  Material material;
  VoxelGrid grid;
  Lattice lattice;
};

json lattice_package_to_json(const LatticePackage& pkg);
LatticePackage lattice_package_from_json(const json& j);
LatticePackage load_lattice_package(const std::filesystem::path& path);

json read_json_file(const std::filesystem::path& path);
// Serialized with a trailing newline; identical inputs give identical bytes.
void write_json_file(const json& j, const std::filesystem::path& path, int indent = 1);

}  // namespace softorgan
