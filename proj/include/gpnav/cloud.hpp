#pragma once

#include "gpnav/geometry.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gpnav {

/// Ground / non-ground partition of a scene cloud.
struct LabelledCloud {
  Points3 ground;
  Points3 nonground;
  Box3 bounds;  // covers both sets

  static LabelledCloud from_parts(Points3 ground, Points3 nonground);
};

// ---------------------------------------------------------------------------
// PLY I/O

enum class PlyEncoding { kAscii, kBinaryLittleEndian };

/// Reads the vertex element of a PLY 1.0 file. x/y/z must be float or double
/// properties; every other vertex property is skipped by size.
Points3 load_ply(const std::filesystem::path& path);

void save_ply(const Points3& points, const std::filesystem::path& path,
              PlyEncoding encoding = PlyEncoding::kBinaryLittleEndian);

// ---------------------------------------------------------------------------
// Preprocessing

Points3 add_gaussian_noise(const Points3& points, double sigma, std::uint64_t seed);

/// One centroid per occupied voxel, in order of first occurrence.
Points3 voxel_downsample(const Points3& points, double cell);
Points2 voxel_downsample(const Points2& points, double cell);

/// Repeatedly enlarges the voxel (x1.25) until at most `cap` points remain.
/// Returns the downsampled set; `cell_used` receives the final voxel size.
template <typename PointList>
PointList downsample_to_cap(const PointList& points, double cell, std::size_t cap,
                            double* cell_used = nullptr) {
  PointList out = voxel_downsample(points, cell);
  while (out.size() > cap) {
    cell *= 1.25;
    out = voxel_downsample(points, cell);
  }
  if (cell_used) *cell_used = cell;
  return out;
}

/// Fallback labelling: z <= threshold is ground.
LabelledCloud segment_ground_by_height(const Points3& points, double z_threshold);

// ---------------------------------------------------------------------------
// Synthetic scenes

struct BoxObstacle {
  Point3 center;
  Point3 size;
};

struct SphereObstacle {
  Point3 center;
  double radius = 0.0;
};

/// Raised traversable platform. Its top and risers are labelled ground.
struct StepPlatform {
  Point2 center;
  Point2 size;
  double height = 0.0;
};

/// Terrain samples on a regular nx by ny lattice spanning the room,
/// row-major in y (heights[j * nx + i] sits at x = i * dx, y = j * dy).
struct Heightmap {
  int nx = 0;
  int ny = 0;
  std::vector<double> heights;
};

enum class GroundProfile { kFlat, kStepped, kHeightmap };

struct SceneSpec {
  Point2 room_size{4.0, 4.0};  // room spans [0, sx] x [0, sy]
  bool walls = true;
  double wall_height = 2.5;
  std::optional<double> ceiling_height;
  std::vector<BoxObstacle> boxes;
  std::vector<SphereObstacle> spheres;
  std::vector<StepPlatform> steps;
  double spacing = 0.1;
  double jitter = 0.0;  // in-surface jitter as a fraction of spacing, [0, 1)
  GroundProfile ground = GroundProfile::kFlat;
  Heightmap heightmap;
  bool omit_steps = false;  // step-less variant of the same room

  /// Throws validation errors naming the offending JSON path.
  void validate() const;

  /// Terrain height (ignoring platforms) at (x, y).
  double terrain_height(double x, double y) const;
};

SceneSpec scene_spec_from_json(const nlohmann::json& doc);
nlohmann::json scene_spec_to_json(const SceneSpec& spec);
SceneSpec load_scene_spec(const std::filesystem::path& path);

LabelledCloud synth_scene(const SceneSpec& spec, std::uint64_t seed);

}  // namespace gpnav
