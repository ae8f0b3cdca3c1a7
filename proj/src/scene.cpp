#include "gpnav/scene.hpp"
#include "gpnav/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace gpnav {

void SystemModel::validate() const {
  if (!(height > 0)) throw validation_error("system height must be > 0");
  if (!(radius > 0)) throw validation_error("system radius must be > 0");
}

SystemModel SystemModel::preset(const std::string& name) {
  struct Dims {
    const char* name;
    double height, width, length;
  };
  static constexpr Dims kPresets[] = {
      {"roomba", 0.1, 0.34, 0.35},
      {"spot", 0.7, 0.19, 1.1},
      {"pepper", 1.2, 0.48, 0.42},
      {"human", 2.0, 0.5, 0.32},
  };
  for (const auto& p : kPresets)
    if (name == p.name) return {p.name, p.height, 0.5 * std::max(p.width, p.length)};
  throw validation_error("unknown system preset '" + name + "'");
}

std::vector<std::string> SystemModel::preset_names() { return {"roomba", "spot", "pepper", "human"}; }

double SceneModel::ground_distance(const Point3& p) const { return ground_field->distance(p); }

double SceneModel::obstacle_distance(const Point3& p) const {
  if (!obstacle_field) return std::numeric_limits<double>::infinity();
  return obstacle_field->distance(p.head<2>());
}

Points3 classify_obstacles(const Points3& nonground, const GpdfModel& ground_field, double height) {
  if (ground_field.dim() != 3) throw validation_error("obstacle classification needs a 3D ground field");
  Points3 out;
  for (const auto& p : nonground)
    if (ground_field.distance(p) <= height) out.push_back(p);
  return out;
}

Points2 project_to_plane(const Points3& points) {
  Points2 out;
  out.reserve(points.size());
  for (const auto& p : points) out.emplace_back(p.x(), p.y());
  return out;
}

std::shared_ptr<const GpdfModel> fit_ground_field(const LabelledCloud& cloud, const SceneConfig& config) {
  if (cloud.ground.empty()) throw validation_error("scene has no ground points");
  const Points3 ground = downsample_to_cap(cloud.ground, config.ground_voxel, config.max_training_points);
  return std::make_shared<const GpdfModel>(GpdfModel::fit(to_rows(ground), config.ground_fit));
}

std::shared_ptr<const GpdfModel> fit_single_field(const LabelledCloud& cloud, const SceneConfig& config) {
  Points3 all = cloud.ground;
  all.insert(all.end(), cloud.nonground.begin(), cloud.nonground.end());
  if (all.empty()) throw validation_error("scene has no points");
  const Points3 train = downsample_to_cap(all, config.single_voxel, config.max_training_points);
  return std::make_shared<const GpdfModel>(GpdfModel::fit(to_rows(train), config.single_fit));
}

SceneModel build_scene(const LabelledCloud& cloud, const SystemModel& system, const SceneConfig& config) {
  auto ground = fit_ground_field(cloud, config);
  auto single = config.build_single_field ? fit_single_field(cloud, config) : nullptr;
  return build_scene(cloud, system, config, std::move(ground), std::move(single));
}

namespace {

GroundSpan ground_span_of(const GpdfModel& ground) {
  return {ground.train().row(2).minCoeff(), ground.train().row(2).maxCoeff()};
}

void attach_free_space(SceneModel& scene, const Points2& projected, double min_cell, int max_depth) {
  scene.quadtree = Quadtree::build(projected, scene.plan_bounds(), min_cell, max_depth);
  scene.graph = build_connectivity_graph(scene.quadtree);
}

}  // namespace

SceneModel build_scene(const LabelledCloud& cloud, const SystemModel& system, const SceneConfig& config,
                       std::shared_ptr<const GpdfModel> ground, std::shared_ptr<const GpdfModel> single) {
  system.validate();
  if (cloud.ground.empty()) throw validation_error("scene has no ground points");
  if (!ground || ground->dim() != 3) throw validation_error("scene needs a fitted 3D ground field");

  SceneModel scene;
  scene.system = system;
  scene.bounds = cloud.bounds;
  scene.ground_field = std::move(ground);
  scene.single_field = std::move(single);
  scene.ground_span = ground_span_of(*scene.ground_field);

  scene.obstacle_points = classify_obstacles(cloud.nonground, *scene.ground_field, system.height);
  const Points2 projected = project_to_plane(scene.obstacle_points);
  if (!projected.empty()) {
    const Points2 train = downsample_to_cap(projected, config.obstacle_voxel, config.max_training_points);
    FitOptions fit = config.obstacle_fit;
    if (train.size() == 1 && !fit.lengthscale) fit.lengthscale = 2.0 * config.obstacle_voxel;
    scene.obstacle_field = std::make_shared<const GpdfModel>(GpdfModel::fit(to_rows(train), fit));
  }
  attach_free_space(scene, projected, config.min_cell.value_or(system.radius), config.max_depth);
  return scene;
}

// ---------------------------------------------------------------------------
// Cache file

namespace {

using nlohmann::json;

json points_json(const Points3& points) {
  json arr = json::array();
  for (const auto& p : points) arr.push_back({p.x(), p.y(), p.z()});
  return arr;
}

Points3 points_from_json(const json& arr) {
  Points3 out;
  for (const auto& p : arr) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
  return out;
}

constexpr int kSceneFormatVersion = 1;

}  // namespace

json scene_to_json(const SceneModel& scene) {
  json doc;
  doc["format"] = "gpnav-scene";
  doc["version"] = kSceneFormatVersion;
  doc["system"] = {{"name", scene.system.name}, {"height", scene.system.height}, {"radius", scene.system.radius}};
  doc["bounds"] = {scene.bounds.lo.x(), scene.bounds.lo.y(), scene.bounds.lo.z(),
                   scene.bounds.hi.x(), scene.bounds.hi.y(), scene.bounds.hi.z()};
  doc["ground_field"] = gpdf_to_json(*scene.ground_field);
  doc["obstacle_field"] = scene.obstacle_field ? gpdf_to_json(*scene.obstacle_field) : json(nullptr);
  doc["single_field"] = scene.single_field ? gpdf_to_json(*scene.single_field) : json(nullptr);
  doc["obstacle_points"] = points_json(scene.obstacle_points);
  doc["quadtree"] = {{"min_cell", scene.quadtree.min_cell()}, {"max_depth", scene.quadtree.max_depth()}};
  return doc;
}

SceneModel scene_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "gpnav-scene" || doc.at("version").get<int>() != kSceneFormatVersion)
      throw parse_error("not a gpnav scene cache (format/version mismatch)");
    SceneModel scene;
    const auto& sys = doc.at("system");
    scene.system = {sys.at("name").get<std::string>(), sys.at("height").get<double>(), sys.at("radius").get<double>()};
    scene.system.validate();
    const auto b = doc.at("bounds").get<std::vector<double>>();
    if (b.size() != 6) throw parse_error("scene cache bounds must have 6 values");
    scene.bounds = Box3(Point3(b[0], b[1], b[2]), Point3(b[3], b[4], b[5]));
    scene.ground_field = std::make_shared<const GpdfModel>(gpdf_from_json(doc.at("ground_field")));
    if (!doc.at("obstacle_field").is_null())
      scene.obstacle_field = std::make_shared<const GpdfModel>(gpdf_from_json(doc.at("obstacle_field")));
    if (doc.contains("single_field") && !doc.at("single_field").is_null())
      scene.single_field = std::make_shared<const GpdfModel>(gpdf_from_json(doc.at("single_field")));
    scene.obstacle_points = points_from_json(doc.at("obstacle_points"));
    scene.ground_span = ground_span_of(*scene.ground_field);
    const auto& qt = doc.at("quadtree");
    attach_free_space(scene, project_to_plane(scene.obstacle_points), qt.at("min_cell").get<double>(),
                      qt.at("max_depth").get<int>());
    return scene;
  } catch (const json::exception& e) {
    throw parse_error(std::string("malformed scene cache: ") + e.what());
  }
}

void save_scene(const SceneModel& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write scene cache '" + path.string() + "'");
  out << scene_to_json(scene).dump();
  if (!out) throw io_error("failed while writing scene cache '" + path.string() + "'");
}

SceneModel load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open scene cache '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw parse_error("scene cache '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return scene_from_json(doc);
}

}  // namespace gpnav
