#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "softorgan/lattice.hpp"

namespace softorgan::wire {

// Region as announced to clients: parameters only, no cells.
struct RegionInfo {
  int id = 0;
  std::string name;
  bool pinned = false;
  double stiffness_scale = 1.0;
  double amplitude_scale = 1.0;
  ActuationSignal actuation;

  bool operator==(const RegionInfo&) const = default;
};

std::vector<RegionInfo> region_infos(const std::vector<Region>& regions);

// server -> client
struct Hello {
  SkinBinding binding;
  TriMesh mesh;
  std::vector<RegionInfo> regions;
};
struct Frame {
  std::uint64_t step = 0;
  double t = 0.0;
  std::vector<Vec3> positions;
};
struct Error {
  std::string msg;
};
struct TuneProgress {
  int iter = 0;
  double objective = 0.0;
};
struct Snapshot {
  std::uint64_t step = 0;
  double t = 0.0;
  bool paused = false;
  std::vector<Vec3> positions;
  std::vector<RegionInfo> regions;
};

// client -> server
struct SetParams {
  int region = 0;
  ActuationSignal actuation;
  std::optional<double> amplitude_scale;
};
struct Poke {
  Vec3 point = Vec3::Zero();
  Vec3 force = Vec3::Zero();
  double radius = 0.0;
  double duration = 0.0;
};
struct Pause {};
struct Resume {};
struct Reset {};
struct SnapshotRequest {};

using ServerMessage = std::variant<Hello, Frame, Error, TuneProgress, Snapshot>;
using ClientMessage = std::variant<SetParams, Poke, Pause, Resume, Reset, SnapshotRequest>;

nlohmann::json to_json(const ServerMessage& msg);
nlohmann::json to_json(const ClientMessage& msg);

// Throw SchemaError on anything that is not a well-formed message.
ServerMessage server_message_from_json(const nlohmann::json& j);
ClientMessage client_message_from_json(const nlohmann::json& j);

std::string encode(const ServerMessage& msg);
std::string encode(const ClientMessage& msg);
ServerMessage decode_server(std::string_view text);
ClientMessage decode_client(std::string_view text);

}  // namespace softorgan::wire
