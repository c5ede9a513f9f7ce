#include "softorgan/wire.hpp"

#include "softorgan/error.hpp"
#include "softorgan/json_io.hpp"

namespace softorgan::wire {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json positions_to_json(const std::vector<Vec3>& ps) {
  json out = json::array();
  for (const auto& p : ps) out.push_back(vec_to_json(p));
  return out;
}

std::vector<Vec3> positions_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("positions must be a list");
  std::vector<Vec3> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back(vec_from_json(p, "position"));
  return out;
}

json region_info_to_json(const RegionInfo& r) {
  return {{"id", r.id},
          {"name", r.name},
          {"pinned", r.pinned},
          {"stiffness_scale", r.stiffness_scale},
          {"amplitude_scale", r.amplitude_scale},
          {"harmonics", signal_to_json(r.actuation)}};
}

RegionInfo region_info_from_json(const json& j) {
  RegionInfo r;
  r.id = j.at("id").get<int>();
  r.name = j.at("name").get<std::string>();
  r.pinned = j.at("pinned").get<bool>();
  r.stiffness_scale = j.at("stiffness_scale").get<double>();
  r.amplitude_scale = j.at("amplitude_scale").get<double>();
  r.actuation = signal_from_json(j.at("harmonics"));
  return r;
}

json regions_json(const std::vector<RegionInfo>& regions) {
  json out = json::array();
  for (const auto& r : regions) out.push_back(region_info_to_json(r));
  return out;
}

std::vector<RegionInfo> regions_from(const json& j) {
  if (!j.is_array()) throw SchemaError("regions must be a list");
  std::vector<RegionInfo> out;
  for (const auto& r : j) out.push_back(region_info_from_json(r));
  return out;
}

double positive(const json& j, const char* key) {
  const double v = j.at(key).get<double>();
  if (!(v > 0.0)) throw SchemaError(std::string("'") + key + "' must be > 0");
  return v;
}

std::uint64_t step_of(const json& j) {
  const auto& v = j.at("step");
  if (!v.is_number_unsigned()) throw SchemaError("'step' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

const std::string& type_of(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw SchemaError("message must be an object with a string 'type'");
  }
  return j.at("type").get_ref<const std::string&>();
}

template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed message: ") + e.what());
  }
}

}  // namespace

std::vector<RegionInfo> region_infos(const std::vector<Region>& regions) {
  std::vector<RegionInfo> out;
  out.reserve(regions.size());
  for (const auto& r : regions) {
    out.push_back({r.id, r.name, r.pinned, r.stiffness_scale, r.amplitude_scale, r.actuation});
  }
  return out;
}

json to_json(const ServerMessage& msg) {
  return std::visit(
      Overloaded{
          [](const Hello& m) -> json {
            return {{"type", "hello"},
                    {"binding", binding_to_json(m.binding)},
                    {"mesh", mesh_to_json(m.mesh)},
                    {"regions", regions_json(m.regions)}};
          },
          [](const Frame& m) -> json {
            return {{"type", "frame"},
                    {"step", m.step},
                    {"t", m.t},
                    {"positions", positions_to_json(m.positions)}};
          },
          [](const Error& m) -> json { return {{"type", "error"}, {"msg", m.msg}}; },
          [](const TuneProgress& m) -> json {
            return {{"type", "tune_progress"}, {"iter", m.iter}, {"objective", m.objective}};
          },
          [](const Snapshot& m) -> json {
            return {{"type", "snapshot"},
                    {"step", m.step},
                    {"t", m.t},
                    {"paused", m.paused},
                    {"positions", positions_to_json(m.positions)},
                    {"regions", regions_json(m.regions)}};
          },
      },
      msg);
}

json to_json(const ClientMessage& msg) {
  return std::visit(
      Overloaded{
          [](const SetParams& m) -> json {
            json j = {{"type", "set_params"},
                      {"region", m.region},
                      {"harmonics", signal_to_json(m.actuation)}};
            if (m.amplitude_scale) j["amplitude_scale"] = *m.amplitude_scale;
            return j;
          },
          [](const Poke& m) -> json {
            return {{"type", "poke"},
                    {"point", vec_to_json(m.point)},
                    {"force", vec_to_json(m.force)},
                    {"radius", m.radius},
                    {"duration", m.duration}};
          },
          [](const Pause&) -> json { return {{"type", "pause"}}; },
          [](const Resume&) -> json { return {{"type", "resume"}}; },
          [](const Reset&) -> json { return {{"type", "reset"}}; },
          [](const SnapshotRequest&) -> json { return {{"type", "snapshot"}}; },
      },
      msg);
}

ServerMessage server_message_from_json(const json& j) {
  return guarded([&]() -> ServerMessage {
    const auto& type = type_of(j);
    if (type == "hello") {
      return Hello{binding_from_json(j.at("binding")), mesh_from_json(j.at("mesh")),
                   regions_from(j.at("regions"))};
    }
    if (type == "frame") {
      return Frame{step_of(j), j.at("t").get<double>(),
                   positions_from_json(j.at("positions"))};
    }
    if (type == "error") return Error{j.at("msg").get<std::string>()};
    if (type == "tune_progress") {
      return TuneProgress{j.at("iter").get<int>(), j.at("objective").get<double>()};
    }
    if (type == "snapshot") {
      return Snapshot{step_of(j), j.at("t").get<double>(),
                      j.at("paused").get<bool>(), positions_from_json(j.at("positions")),
                      regions_from(j.at("regions"))};
    }
    throw SchemaError("unknown server message type '" + type + "'");
  });
}

ClientMessage client_message_from_json(const json& j) {
  return guarded([&]() -> ClientMessage {
    const auto& type = type_of(j);
    if (type == "set_params") {
      SetParams m;
      const auto& region = j.at("region");
      if (!region.is_number_integer()) throw SchemaError("'region' must be an integer");
      m.region = region.get<int>();
      m.actuation = signal_from_json(j.at("harmonics"));
      if (j.contains("amplitude_scale") && !j.at("amplitude_scale").is_null()) {
        const double s = j.at("amplitude_scale").get<double>();
        if (!(s >= 0.0)) throw SchemaError("'amplitude_scale' must be >= 0");
        m.amplitude_scale = s;
      }
      return m;
    }
    if (type == "poke") {
      return Poke{vec_from_json(j.at("point"), "point"), vec_from_json(j.at("force"), "force"),
                  positive(j, "radius"), positive(j, "duration")};
    }
    if (type == "pause") return Pause{};
    if (type == "resume") return Resume{};
    if (type == "reset") return Reset{};
    if (type == "snapshot") return SnapshotRequest{};
    throw SchemaError("unknown client message type '" + type + "'");
  });
}

std::string encode(const ServerMessage& msg) { return to_json(msg).dump(); }
std::string encode(const ClientMessage& msg) { return to_json(msg).dump(); }

ServerMessage decode_server(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  return server_message_from_json(j);
}

ClientMessage decode_client(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  return client_message_from_json(j);
}

}  // namespace softorgan::wire
