#include "softorgan/json_io.hpp"

#include <fstream>

#include "softorgan/error.hpp"

namespace softorgan {

namespace {

const json& field(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(what + ": missing '" + key + "'");
  }
  return j.at(key);
}

double number(const json& j, const char* key, const std::string& what) {
  const auto& v = field(j, key, what);
  if (!v.is_number()) throw SchemaError(what + ": '" + key + "' must be a number");
  return v.get<double>();
}

double number_or(const json& j, const char* key, double fallback, const std::string& what) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return number(j, key, what);
}

bool boolean_or(const json& j, const char* key, bool fallback, const std::string& what) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_boolean()) throw SchemaError(what + ": '" + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

std::string string_or(const json& j, const char* key, const std::string& fallback,
                      const std::string& what) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_string()) throw SchemaError(what + ": '" + key + "' must be a string");
  return j.at(key).get<std::string>();
}

CellCoord cell_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number_integer() || !j[1].is_number_integer() ||
      !j[2].is_number_integer()) {
    throw SchemaError(what + ": cell must be [i,j,k]");
  }
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

template <class F>
auto guarded(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw SchemaError(what + ": " + e.what());
  }
}

json cell_to_json(const CellCoord& c) { return json::array({c.x, c.y, c.z}); }

}  // namespace

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
      !j[2].is_number()) {
    throw SchemaError(what + ": expected [x,y,z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json signal_to_json(const ActuationSignal& s) {
  json out = json::array();
  for (const auto& h : s.harmonics) {
    out.push_back({{"a", h.amplitude}, {"f", h.frequency}, {"phi", h.phase}});
  }
  return out;
}

ActuationSignal signal_from_json(const json& j) {
  ActuationSignal s;
  if (j.is_null()) return s;
  if (!j.is_array()) throw SchemaError("harmonics must be a list");
  for (const auto& h : j) {
    s.harmonics.push_back(
        {number(h, "a", "harmonic"), number(h, "f", "harmonic"), number(h, "phi", "harmonic")});
  }
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("harmonics: ") + e.what());
  }
  return s;
}

json mesh_to_json(const TriMesh& mesh) {
  json verts = json::array();
  for (const auto& v : mesh.vertices) verts.push_back(vec_to_json(v));
  json tris = json::array();
  for (const auto& t : mesh.triangles) tris.push_back(json::array({t[0], t[1], t[2]}));
  return {{"name", mesh.name}, {"vertices", std::move(verts)}, {"triangles", std::move(tris)}};
}

namespace {

TriMesh mesh_from_json_unchecked(const json& j) {
  TriMesh mesh;
  mesh.name = string_or(j, "name", "mesh", "mesh");
  const auto& verts = field(j, "vertices", "mesh");
  const auto& tris = field(j, "triangles", "mesh");
  if (!verts.is_array() || !tris.is_array()) throw SchemaError("mesh: lists expected");
  for (const auto& v : verts) mesh.vertices.push_back(vec_from_json(v, "mesh vertex"));
  for (const auto& t : tris) {
    if (!t.is_array() || t.size() != 3) throw SchemaError("mesh: triangle must be [i,j,k]");
    mesh.triangles.push_back({t[0].get<std::uint32_t>(), t[1].get<std::uint32_t>(),
                              t[2].get<std::uint32_t>()});
  }
  try {
    mesh.validate();
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("mesh: ") + e.what());
  }
  return mesh;
}

}  // namespace

TriMesh mesh_from_json(const json& j) {
  return guarded("mesh", [&] { return mesh_from_json_unchecked(j); });
}

json binding_to_json(const SkinBinding& binding) {
  json out = json::array();
  for (const auto& vb : binding.vertices) {
    json p = json::array();
    json w = json::array();
    for (const auto& inf : vb.active()) {
      p.push_back(inf.particle);
      w.push_back(inf.weight);
    }
    out.push_back({{"p", std::move(p)}, {"w", std::move(w)}, {"offset", vec_to_json(vb.offset)}});
  }
  return out;
}

namespace {

SkinBinding binding_from_json_unchecked(const json& j) {
  if (!j.is_array()) throw SchemaError("binding must be a list");
  SkinBinding b;
  for (const auto& e : j) {
    const auto& p = field(e, "p", "binding");
    const auto& w = field(e, "w", "binding");
    if (!p.is_array() || !w.is_array() || p.size() != w.size() || p.empty() ||
        p.size() > kMaxInfluences) {
      throw SchemaError("binding: 'p' and 'w' must be equal-length lists of 1..4 entries");
    }
    VertexBinding vb;
    vb.count = static_cast<std::uint32_t>(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      vb.influences[k] = {p[k].get<std::uint32_t>(), w[k].get<double>()};
    }
    vb.offset = vec_from_json(field(e, "offset", "binding"), "binding offset");
    b.vertices.push_back(vb);
  }
  return b;
}

}  // namespace

SkinBinding binding_from_json(const json& j) {
  return guarded("binding", [&] { return binding_from_json_unchecked(j); });
}

json regions_to_json(const std::vector<Region>& regions) {
  json out = json::array();
  for (const auto& r : regions) {
    out.push_back({{"id", r.id},
                   {"name", r.name},
                   {"pinned", r.pinned},
                   {"stiffness_scale", r.stiffness_scale},
                   {"amplitude_scale", r.amplitude_scale},
                   {"harmonics", signal_to_json(r.actuation)}});
  }
  return out;
}

namespace {

RegionSpec region_spec_from_json_unchecked(const json& j) {
  if (!j.is_array() || j.empty()) throw SchemaError("region spec must be a non-empty list");
  auto rule_from = [](const json& e, std::size_t idx) {
    const std::string what = "region spec entry " + std::to_string(idx);
    if (!e.is_object()) throw SchemaError(what + ": must be an object");
    RegionRule rule;
    rule.name = string_or(e, "name", "region" + std::to_string(idx), what);
    if (e.contains("box") && !e.at("box").is_null()) {
      const auto& box = e.at("box");
      if (!box.is_array() || box.size() != 2) throw SchemaError(what + ": box must be [[min],[max]]");
      rule.box = std::array<Vec3, 2>{vec_from_json(box[0], what), vec_from_json(box[1], what)};
    }
    if (e.contains("cells") && !e.at("cells").is_null()) {
      if (!e.at("cells").is_array()) throw SchemaError(what + ": cells must be a list");
      for (const auto& c : e.at("cells")) rule.cells.push_back(cell_from_json(c, what));
    }
    rule.pinned = boolean_or(e, "pinned", false, what);
    rule.stiffness_scale = number_or(e, "stiffness_scale", 1.0, what);
    rule.amplitude_scale = number_or(e, "amplitude_scale", 1.0, what);
    if (rule.stiffness_scale < 0.0 || rule.amplitude_scale < 0.0) {
      throw SchemaError(what + ": scales must be >= 0");
    }
    if (e.contains("actuation")) rule.actuation = signal_from_json(e.at("actuation"));
    return rule;
  };
  RegionSpec spec;
  for (std::size_t k = 0; k + 1 < j.size(); ++k) spec.rules.push_back(rule_from(j[k], k));
  spec.fallback = rule_from(j.back(), j.size() - 1);
  if (spec.fallback.box || !spec.fallback.cells.empty()) {
    throw SchemaError("region spec: the last entry must be the default region with \"box\": null");
  }
  return spec;
}

}  // namespace

RegionSpec region_spec_from_json(const json& j) {
  return guarded("region spec", [&] { return region_spec_from_json_unchecked(j); });
}

RegionSpec load_region_spec(const std::filesystem::path& path) {
  return region_spec_from_json(read_json_file(path));
}

json params_to_json(const Lattice& lattice, const RegionParams& params,
                    const std::vector<double>& residuals) {
  json regions = json::array();
  for (std::size_t r = 0; r < params.size(); ++r) {
    json e = {{"id", static_cast<int>(r)},
              {"name", r < lattice.regions.size() ? lattice.regions[r].name : ""},
              {"harmonics", signal_to_json(params[r])}};
    e["residual"] = r < residuals.size() ? json(residuals[r]) : json(nullptr);
    regions.push_back(std::move(e));
  }
  return {{"regions", std::move(regions)}};
}

json fit_report_to_json(const FitReport& report) {
  json regions = json::array();
  for (const auto& rf : report.regions) {
    regions.push_back({{"id", rf.id},
                       {"name", rf.name},
                       {"harmonics", signal_to_json(rf.signal)},
                       {"residual", rf.skipped ? json(nullptr) : json(rf.residual)}});
  }
  return {{"regions", std::move(regions)}};
}

namespace {

RegionParams params_from_json_unchecked(const json& j, std::size_t region_count) {
  const auto& regions = field(j, "regions", "params");
  if (!regions.is_array()) throw SchemaError("params: 'regions' must be a list");
  RegionParams params(region_count);
  std::vector<bool> seen(region_count, false);
  for (const auto& e : regions) {
    const auto& id_field = field(e, "id", "params region");
    if (!id_field.is_number_integer()) throw SchemaError("params: region id must be an integer");
    const int id = id_field.get<int>();
    if (id < 0 || static_cast<std::size_t>(id) >= region_count) {
      throw SchemaError("params: region id " + std::to_string(id) + " out of range");
    }
    if (seen[static_cast<std::size_t>(id)]) {
      throw SchemaError("params: region id " + std::to_string(id) + " repeated");
    }
    seen[static_cast<std::size_t>(id)] = true;
    params[static_cast<std::size_t>(id)] = signal_from_json(field(e, "harmonics", "params region"));
  }
  return params;
}

}  // namespace

RegionParams params_from_json(const json& j, std::size_t region_count) {
  return guarded("params", [&] { return params_from_json_unchecked(j, region_count); });
}

RegionParams load_params(const std::filesystem::path& path, std::size_t region_count) {
  return params_from_json(read_json_file(path), region_count);
}

json tune_report_to_json(const TuneReport& report, const Lattice& lattice) {
  json history = json::array();
  for (const auto& h : report.history) {
    history.push_back({{"iter", h.iteration},
                       {"objective", std::isfinite(h.objective) ? json(h.objective) : json(nullptr)},
                       {"best", std::isfinite(h.best) ? json(h.best) : json(nullptr)},
                       {"temperature", h.temperature}});
  }
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"initial_objective", finite_or_null(report.initial_objective)},
          {"best_objective", finite_or_null(report.best_objective)},
          {"evaluations", report.evaluations},
          {"rejected_unstable", report.rejected_unstable},
          {"history", std::move(history)},
          {"best_params", params_to_json(lattice, report.best_params)}};
}

json lattice_package_to_json(const LatticePackage& pkg) {
  json regions = json::array();
  for (const auto& r : pkg.lattice.regions) {
    json cells = json::array();
    for (const auto& c : r.cells) cells.push_back(cell_to_json(c));
    regions.push_back({{"id", r.id},
                       {"name", r.name},
                       {"pinned", r.pinned},
                       {"stiffness_scale", r.stiffness_scale},
                       {"amplitude_scale", r.amplitude_scale},
                       {"harmonics", signal_to_json(r.actuation)},
                       {"cells", std::move(cells)}});
  }
  return {{"format", "softorgan-lattice"},
          {"version", 1},
          {"resolution", pkg.resolution},
          {"material",
           {{"stiffness", pkg.material.stiffness},
            {"damping", pkg.material.damping},
            {"particle_mass", pkg.material.particle_mass}}},
          {"mesh", mesh_to_json(pkg.mesh)},
          {"grid",
           {{"origin", vec_to_json(pkg.grid.origin)},
            {"cell_size", pkg.grid.cell_size},
            {"dims", pkg.grid.dims}}},
          {"regions", std::move(regions)},
          {"summary",
           {{"particles", pkg.lattice.particles.size()},
            {"constraints", pkg.lattice.constraints.size()},
            {"regions", pkg.lattice.regions.size()}}}};
}

namespace {

LatticePackage lattice_package_from_json_unchecked(const json& j) {
  if (string_or(j, "format", "", "lattice") != "softorgan-lattice") {
    throw SchemaError("lattice: not a softorgan lattice file");
  }
  LatticePackage pkg;
  pkg.mesh = mesh_from_json(field(j, "mesh", "lattice"));
  const auto& res = field(j, "resolution", "lattice");
  if (!res.is_number_integer()) throw SchemaError("lattice: resolution must be an integer");
  pkg.resolution = res.get<int>();
  const auto& mat = field(j, "material", "lattice");
  pkg.material = {number(mat, "stiffness", "material"), number(mat, "damping", "material"),
                  number(mat, "particle_mass", "material")};
  pkg.grid = voxelize(pkg.mesh, pkg.resolution);

  std::vector<Region> regions;
  const auto& rj = field(j, "regions", "lattice");
  if (!rj.is_array()) throw SchemaError("lattice: regions must be a list");
  for (const auto& e : rj) {
    Region r;
    r.id = static_cast<int>(number(e, "id", "lattice region"));
    r.name = string_or(e, "name", "", "lattice region");
    r.pinned = boolean_or(e, "pinned", false, "lattice region");
    r.stiffness_scale = number_or(e, "stiffness_scale", 1.0, "lattice region");
    r.amplitude_scale = number_or(e, "amplitude_scale", 1.0, "lattice region");
    r.actuation = signal_from_json(e.contains("harmonics") ? e.at("harmonics") : json(nullptr));
    for (const auto& c : field(e, "cells", "lattice region")) {
      r.cells.push_back(cell_from_json(c, "lattice region"));
    }
    regions.push_back(std::move(r));
  }
  pkg.lattice = build_lattice(pkg.grid, std::move(regions), pkg.material);

  if (j.contains("summary")) {
    const auto& s = j.at("summary");
    const auto particles = static_cast<std::size_t>(number(s, "particles", "lattice summary"));
    const auto constraints = static_cast<std::size_t>(number(s, "constraints", "lattice summary"));
    if (particles != pkg.lattice.particles.size() ||
        constraints != pkg.lattice.constraints.size()) {
      throw SchemaError("lattice: rebuilt counts do not match the recorded summary");
    }
  }
  return pkg;
}

}  // namespace

LatticePackage lattice_package_from_json(const json& j) {
  return guarded("lattice", [&] { return lattice_package_from_json_unchecked(j); });
}

LatticePackage load_lattice_package(const std::filesystem::path& path) {
  return lattice_package_from_json(read_json_file(path));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path, int indent) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(indent) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace softorgan
