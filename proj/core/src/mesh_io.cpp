#include "softorgan/mesh_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "softorgan/error.hpp"

namespace softorgan {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line) {
  double value = 0.0;
  const auto* begin = tok.data();
  const auto* end = tok.data() + tok.size();
  if (!tok.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError(line, "bad number '" + std::string(tok) + "'");
  }
  return value;
}

// Resolves one face corner ("i", "i/t", "i//n", "i/t/n") to a 0-based index.
std::int64_t parse_face_index(std::string_view tok, std::size_t vertex_count,
                              std::size_t line) {
  const auto slash = tok.find('/');
  const auto head = tok.substr(0, slash);
  std::int64_t idx = 0;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
  if (ec != std::errc() || ptr != head.data() + head.size()) {
    throw ParseError(line, "bad face index '" + std::string(tok) + "'");
  }
  if (idx == 0) throw ParseError(line, "face index 0 is not valid in OBJ");
  if (idx < 0) return static_cast<std::int64_t>(vertex_count) + idx;
  return idx - 1;
}

std::vector<Vec3> parse_frame(const json& frame, std::size_t index) {
  if (!frame.is_array()) {
    throw SchemaError("frames[" + std::to_string(index) + "] is not an array");
  }
  std::vector<Vec3> out;
  out.reserve(frame.size());
  for (const auto& p : frame) {
    if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
        !p[2].is_number()) {
      throw SchemaError("frames[" + std::to_string(index) +
                        "] holds a position that is not [x,y,z]");
    }
    out.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  }
  return out;
}

}  // namespace

void TriMesh::validate() const {
  if (vertices.size() < 3) throw ValidationError("mesh needs at least 3 vertices");
  if (triangles.empty()) throw ValidationError("mesh needs at least 1 triangle");
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    for (auto idx : tri) {
      if (idx >= vertices.size()) {
        throw ValidationError("triangle " + std::to_string(t) + " references vertex " +
                              std::to_string(idx + 1) + " of " +
                              std::to_string(vertices.size()));
      }
    }
    if (tri[0] == tri[1] && tri[1] == tri[2]) {
      throw ValidationError("triangle " + std::to_string(t) + " is degenerate");
    }
  }
}

Aabb bounding_box(const std::vector<Vec3>& points) {
  Aabb box{Vec3::Constant(std::numeric_limits<double>::infinity()),
           Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

void KeyframeTrack::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ValidationError("fps must be > 0");
  if (frames.size() < 2) throw ValidationError("a track needs at least 2 frames");
  const auto w = frames.front().size();
  for (std::size_t k = 1; k < frames.size(); ++k) {
    if (frames[k].size() != w) throw WidthMismatch(w, frames[k].size());
  }
  if (period_frames) {
    const int p = *period_frames;
    if (p < 2 || static_cast<std::size_t>(p) > frames.size()) {
      throw ValidationError("period_frames must lie in [2, frame count]");
    }
  }
}

double KeyframeTrack::period_seconds() const {
  if (!period_frames) throw PreconditionError("track has no period_frames");
  return static_cast<double>(*period_frames) / fps;
}

double KeyframeTrack::frame_position(double t) const {
  const double last = static_cast<double>(frames.size() - 1);
  double f = std::max(0.0, t * fps);
  if (f <= last) return f;
  if (!period_frames) return last;
  const double p = static_cast<double>(*period_frames);
  f -= p * std::ceil((f - last) / p);
  return std::clamp(f, 0.0, last);
}

Vec3 KeyframeTrack::sample(std::size_t vertex, double t) const {
  const double f = frame_position(t);
  const auto k0 = static_cast<std::size_t>(std::floor(f));
  const auto k1 = std::min(k0 + 1, frames.size() - 1);
  const double u = f - static_cast<double>(k0);
  return (1.0 - u) * frames[k0][vertex] + u * frames[k1][vertex];
}

TriMesh parse_obj(std::istream& in, const std::string& name) {
  TriMesh mesh;
  mesh.name = name;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto toks = split_ws(line);
    const auto tag = toks.front();
    if (tag == "v") {
      if (toks.size() != 4 && toks.size() != 5) {
        throw ParseError(line_no, "vertex record needs 3 coordinates");
      }
      mesh.vertices.emplace_back(parse_double(toks[1], line_no),
                                 parse_double(toks[2], line_no),
                                 parse_double(toks[3], line_no));
    } else if (tag == "f") {
      const std::size_t corners = toks.size() - 1;
      if (corners < 3 || corners > 4) {
        throw ParseError(line_no, "only triangle and quad faces are supported, got " +
                                      std::to_string(corners) + " corners");
      }
      std::array<std::int64_t, 4> idx{};
      for (std::size_t c = 0; c < corners; ++c) {
        idx[c] = parse_face_index(toks[c + 1], mesh.vertices.size(), line_no);
        if (idx[c] < 0) throw ValidationError("line " + std::to_string(line_no) +
                                              ": relative index before first vertex");
      }
      auto as_u32 = [&](std::int64_t i) {
        if (i > std::numeric_limits<std::uint32_t>::max()) {
          throw ValidationError("line " + std::to_string(line_no) + ": index too large");
        }
        return static_cast<std::uint32_t>(i);
      };
      mesh.triangles.push_back({as_u32(idx[0]), as_u32(idx[1]), as_u32(idx[2])});
      if (corners == 4) {
        mesh.triangles.push_back({as_u32(idx[0]), as_u32(idx[2]), as_u32(idx[3])});
      }
    } else if (tag == "o" && toks.size() > 1) {
      mesh.name = std::string(toks[1]);
    }
    // vn, vt, g, s, usemtl, mtllib and friends carry nothing we use.
  }
  mesh.validate();
  return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path.string());
  return parse_obj(in, path.stem().string());
}

void write_obj(const TriMesh& mesh, std::ostream& out) {
  char buf[128];
  if (!mesh.name.empty()) out << "o " << mesh.name << '\n';
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

void export_frame(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_obj(mesh, out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::string frame_filename(const std::string& prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%04zu.obj", index);
  return prefix + buf;
}

KeyframeTrack parse_keyframes(std::istream& in, std::size_t expected_width) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("keyframes: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("keyframes: top level must be an object");
  if (!doc.contains("fps") || !doc["fps"].is_number()) {
    throw SchemaError("keyframes: 'fps' must be a number");
  }
  if (!doc.contains("frames") || !doc["frames"].is_array()) {
    throw SchemaError("keyframes: 'frames' must be an array");
  }
  KeyframeTrack track;
  track.fps = doc["fps"].get<double>();
  if (doc.contains("period_frames") && !doc["period_frames"].is_null()) {
    if (!doc["period_frames"].is_number_integer()) {
      throw SchemaError("keyframes: 'period_frames' must be an integer or null");
    }
    track.period_frames = doc["period_frames"].get<int>();
  }
  const auto& frames = doc["frames"];
  track.frames.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    auto frame = parse_frame(frames[k], k);
    if (frame.size() != expected_width) throw WidthMismatch(expected_width, frame.size());
    track.frames.push_back(std::move(frame));
  }
  try {
    track.validate();
  } catch (const WidthMismatch&) {
    throw;
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("keyframes: ") + e.what());
  }
  return track;
}

KeyframeTrack load_keyframes(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path.string());
  return parse_keyframes(in, mesh.vertices.size());
}

void write_keyframes(const KeyframeTrack& track, std::ostream& out) {
  json doc;
  doc["fps"] = track.fps;
  doc["period_frames"] = track.period_frames ? json(*track.period_frames) : json(nullptr);
  json frames = json::array();
  for (const auto& frame : track.frames) {
    json f = json::array();
    for (const auto& p : frame) f.push_back({p.x(), p.y(), p.z()});
    frames.push_back(std::move(f));
  }
  doc["frames"] = std::move(frames);
  out << doc.dump() << '\n';
}

void save_keyframes(const KeyframeTrack& track, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_keyframes(track, out);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace softorgan
