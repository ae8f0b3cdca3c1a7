#pragma once

#include "gpnav/cloud.hpp"
#include "gpnav/freespace.hpp"
#include "gpnav/gpdf.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace gpnav {

/// Cylindrical abstraction of a ground-based system.
struct SystemModel {
  std::string name;
  double height = 0;  // h_r
  double radius = 0;

  void validate() const;

  /// Built-in presets: roomba, spot, pepper, human. Radius is half of the
  /// larger footprint dimension.
  static SystemModel preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

struct SceneConfig {
  double ground_voxel = 0.1;
  double obstacle_voxel = 0.1;
  double single_voxel = 0.1;
  std::size_t max_training_points = 5000;
  FitOptions ground_fit{};
  FitOptions obstacle_fit{};
  FitOptions single_fit{};
  std::optional<double> min_cell;  // defaults to the system radius
  int max_depth = 12;
  /// Also fit one 3D field over every point (used by the single-field baseline).
  bool build_single_field = false;

  SceneConfig() {
    ground_fit.keep_factor = false;
    obstacle_fit.keep_factor = false;
    single_fit.keep_factor = false;
  }
};

/// Dual distance-field scene for one system. Immutable after construction.
struct SceneModel {
  SystemModel system;
  std::shared_ptr<const GpdfModel> ground_field;    // 3D, ground points
  std::shared_ptr<const GpdfModel> obstacle_field;  // 2D, null when no obstacle is in reach
  std::shared_ptr<const GpdfModel> single_field;    // 3D over all points, optional
  Points3 obstacle_points;                          // classified set, 3D
  Quadtree quadtree;
  FreeCellGraph graph;
  Box3 bounds;
  GroundSpan ground_span;

  Box2 plan_bounds() const { return {bounds.lo.head<2>(), bounds.hi.head<2>()}; }

  double ground_distance(const Point3& p) const;
  /// +infinity when the obstacle field is absent.
  double obstacle_distance(const Point3& p) const;
};

/// Non-ground points whose ground distance is at most `height`.
Points3 classify_obstacles(const Points3& nonground, const GpdfModel& ground_field, double height);

Points2 project_to_plane(const Points3& points);

/// Fits the ground field used by build_scene; shareable across systems.
std::shared_ptr<const GpdfModel> fit_ground_field(const LabelledCloud& cloud, const SceneConfig& config);
std::shared_ptr<const GpdfModel> fit_single_field(const LabelledCloud& cloud, const SceneConfig& config);

SceneModel build_scene(const LabelledCloud& cloud, const SystemModel& system, const SceneConfig& config);

/// As build_scene, reusing previously fitted fields (single may be null).
SceneModel build_scene(const LabelledCloud& cloud, const SystemModel& system, const SceneConfig& config,
                       std::shared_ptr<const GpdfModel> ground, std::shared_ptr<const GpdfModel> single);

nlohmann::json scene_to_json(const SceneModel& scene);
SceneModel scene_from_json(const nlohmann::json& doc);
void save_scene(const SceneModel& scene, const std::filesystem::path& path);
SceneModel load_scene(const std::filesystem::path& path);

}  // namespace gpnav
