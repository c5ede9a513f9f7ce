#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace softorgan {

using Vec3 = Eigen::Vector3d;
using Triangle = std::array<std::uint32_t, 3>;

// Indexed triangle surface mesh. Positions in meters.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string name;

  // Throws ValidationError when an invariant is broken.
  void validate() const;
};

struct Aabb {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return extent().norm(); }
};

Aabb bounding_box(const std::vector<Vec3>& points);

// Dense per-vertex animation. Frame k is the pose at time k / fps.
struct KeyframeTrack {
  double fps = 30.0;
  std::vector<std::vector<Vec3>> frames;
  std::optional<int> period_frames;

  void validate() const;
  std::size_t width() const { return frames.empty() ? 0 : frames.front().size(); }
  double period_seconds() const;  // requires period_frames

  // Fractional frame index for time t after the boundary rule: beyond the
  // last frame, wrap modulo the period when one is set, otherwise hold.
  double frame_position(double t) const;

  // Linearly interpolated position of one vertex at time t.
  Vec3 sample(std::size_t vertex, double t) const;
};

TriMesh parse_obj(std::istream& in, const std::string& name = "mesh");
TriMesh load_mesh(const std::filesystem::path& path);

// Writes "v" records with enough digits for a 1e-6 round trip and 1-based
// "f" records. Throws IoError when the file cannot be written.
void write_obj(const TriMesh& mesh, std::ostream& out);
void export_frame(const TriMesh& mesh, const std::filesystem::path& path);

// "<prefix>_%04d.obj"
std::string frame_filename(const std::string& prefix, std::size_t index);

KeyframeTrack parse_keyframes(std::istream& in, std::size_t expected_width);
KeyframeTrack load_keyframes(const std::filesystem::path& path, const TriMesh& mesh);
void write_keyframes(const KeyframeTrack& track, std::ostream& out);
void save_keyframes(const KeyframeTrack& track, const std::filesystem::path& path);

}  // namespace softorgan
