#include "doctest.h"
#include "oracles.hpp"

#include "gpnav/error.hpp"
#include "gpnav/scene.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

using namespace gpnav;

namespace {

SceneSpec pillar_room() {
  SceneSpec spec;
  spec.room_size = {3.0, 3.0};
  spec.wall_height = 2.5;
  spec.boxes.push_back({Point3(1.5, 1.5, 1.25), Point3(0.4, 0.4, 2.5)});
  return spec;
}

SceneSpec ball_room() {
  SceneSpec spec;
  spec.room_size = {3.0, 3.0};
  spec.spheres.push_back({Point3(1.5, 1.5, 0.7), 0.3});
  return spec;
}

bool contains(const Points3& set, const Point3& p) { return std::find(set.begin(), set.end(), p) != set.end(); }

}  // namespace

TEST_CASE("system presets") {
  const auto roomba = SystemModel::preset("roomba");
  CHECK(roomba.height == 0.1);
  CHECK(roomba.radius == doctest::Approx(0.175));
  CHECK(SystemModel::preset("spot").height == 0.7);
  CHECK(SystemModel::preset("spot").radius == doctest::Approx(0.55));
  CHECK(SystemModel::preset("pepper").height == 1.2);
  CHECK(SystemModel::preset("pepper").radius == doctest::Approx(0.24));
  CHECK(SystemModel::preset("human").height == 2.0);
  CHECK(SystemModel::preset("human").radius == doctest::Approx(0.25));
  CHECK_THROWS_AS(SystemModel::preset("tank"), Error);
  CHECK_THROWS_AS((SystemModel{"x", 0.0, 1.0}.validate()), Error);
  CHECK_THROWS_AS((SystemModel{"x", 1.0, -1.0}.validate()), Error);
}

TEST_CASE("classify obstacles over flat ground") {
  const Points3 plane = oracle::sample_plane_z(0.0, -2, 2, -2, 2, 0.1);
  const GpdfModel ground = GpdfModel::fit(to_rows(plane), FitOptions{});
  const Points3 out = classify_obstacles({Point3(0, 0, 2.5), Point3(0, 0, 1.0)}, ground, 2.0);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == Point3(0, 0, 1.0));
  CHECK(classify_obstacles({}, ground, 2.0).empty());

  const GpdfModel flat2 = GpdfModel::fit(Eigen::MatrixXd::Zero(1, 2), KernelParams{});
  CHECK_THROWS_AS(classify_obstacles({}, flat2, 2.0), Error);
}

TEST_CASE("project to plane") {
  const Points2 out = project_to_plane({Point3(1, 2, 3), Point3(4, 5, 6), Point3(4, 5, 9)});
  REQUIRE(out.size() == 3);
  CHECK(out[0] == Point2(1, 2));
  CHECK(out[1] == Point2(4, 5));
  CHECK(out[2] == Point2(4, 5));
  CHECK(project_to_plane({}).empty());
}

TEST_CASE("pillar room for a human") {
  const LabelledCloud cloud = synth_scene(pillar_room(), 0);
  const SystemModel human = SystemModel::preset("human");
  const SceneModel scene = build_scene(cloud, human, SceneConfig{});

  REQUIRE(scene.obstacle_field);
  CHECK(scene.obstacle_field->dim() == 2);
  CHECK(scene.ground_field->dim() == 3);
  CHECK(!scene.single_field);

  // Every non-ground sample clearly below or above the height limit lands on
  // the matching side of the classification.
  int below = 0, above = 0;
  for (const auto& p : cloud.nonground) {
    if (p.z() < 1.9) {
      CHECK(contains(scene.obstacle_points, p));
      ++below;
    } else if (p.z() > 2.1) {
      CHECK(!contains(scene.obstacle_points, p));
      ++above;
    }
  }
  CHECK(below > 100);
  CHECK(above > 10);

  // Obstacle training set is the downsampled projection.
  const Points2 expected = downsample_to_cap(project_to_plane(scene.obstacle_points), 0.1, 5000);
  REQUIRE(scene.obstacle_field->size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(scene.obstacle_field->train().col(static_cast<Eigen::Index>(i)) == expected[i]);

  CHECK(scene.quadtree.min_cell() == human.radius);
  CHECK(scene.quadtree.free_leaf_count() > 0);
  CHECK(scene.graph.vertices.size() == scene.quadtree.free_leaf_count());
}

TEST_CASE("ball at 0.7 m is not an obstacle for a roomba") {
  const LabelledCloud cloud = synth_scene(ball_room(), 0);
  const SceneModel roomba = build_scene(cloud, SystemModel::preset("roomba"), SceneConfig{});
  for (const auto& p : roomba.obstacle_points) CHECK((p - Point3(1.5, 1.5, 0.7)).norm() > 0.31);
  const SceneModel human = build_scene(cloud, SystemModel::preset("human"), SceneConfig{});
  int ball = 0;
  for (const auto& p : human.obstacle_points) ball += (p - Point3(1.5, 1.5, 0.7)).norm() < 0.31;
  CHECK(ball > 50);
}

TEST_CASE("room without obstacles") {
  SceneSpec spec;
  spec.room_size = {2.0, 2.0};
  spec.walls = false;
  const SceneModel scene = build_scene(synth_scene(spec, 0), SystemModel::preset("human"), SceneConfig{});
  CHECK(!scene.obstacle_field);
  CHECK(scene.obstacle_points.empty());
  CHECK(scene.obstacle_distance(Point3(1, 1, 2)) == std::numeric_limits<double>::infinity());
  CHECK(scene.quadtree.leaves().size() == 1);
  CHECK(scene.quadtree.free_leaf_count() == 1);
}

TEST_CASE("empty ground is rejected") {
  LabelledCloud cloud = LabelledCloud::from_parts({}, {Point3(0, 0, 1)});
  try {
    build_scene(cloud, SystemModel::preset("human"), SceneConfig{});
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
  }
}

TEST_CASE("height filter soundness against the true ground distance") {
  SceneSpec spec;
  spec.room_size = {4.0, 4.0};
  spec.ground = GroundProfile::kStepped;
  spec.boxes.push_back({Point3(1.0, 1.0, 1.25), Point3(0.4, 0.4, 2.5)});
  spec.steps.push_back({Point2(2.5, 2.2), Point2(1.0, 1.2), 0.35});
  spec.boxes.push_back({Point3(0.8, 3.0, 0.9), Point3(0.6, 0.6, 0.4)});
  const LabelledCloud cloud = synth_scene(spec, 0);
  const auto ground = fit_ground_field(cloud, SceneConfig{});
  for (double h : {0.1, 0.7, 1.2, 2.0}) {
    const Points3 xo = classify_obstacles(cloud.nonground, *ground, h);
    for (const auto& p : cloud.nonground) {
      const double truth = oracle::nn_distance(cloud.ground, p);
      if (contains(xo, p))
        CHECK(truth <= h + 0.05);
      else
        CHECK(truth > h - 0.05);
    }
  }
}

TEST_CASE("obstacle set grows with the system height") {
  SceneSpec spec = ball_room();
  spec.boxes.push_back({Point3(0.8, 0.8, 1.2), Point3(0.5, 0.5, 0.4)});
  const LabelledCloud cloud = synth_scene(spec, 0);
  const auto ground = fit_ground_field(cloud, SceneConfig{});
  Points3 prev;
  for (double h : {0.05, 0.1, 0.4, 0.7, 1.0, 1.2, 2.0, 3.0}) {
    const Points3 cur = classify_obstacles(cloud.nonground, *ground, h);
    for (const auto& p : prev) CHECK(contains(cur, p));
    CHECK(cur.size() >= prev.size());
    prev = cur;
  }
}

TEST_CASE("scene build is deterministic and shares fields") {
  const LabelledCloud cloud = synth_scene(pillar_room(), 0);
  SceneConfig config;
  config.build_single_field = true;
  const SceneModel a = build_scene(cloud, SystemModel::preset("human"), config);
  const SceneModel b = build_scene(cloud, SystemModel::preset("human"), config);
  CHECK(a.ground_field->alpha() == b.ground_field->alpha());
  CHECK(a.obstacle_field->alpha() == b.obstacle_field->alpha());
  REQUIRE(a.single_field);
  CHECK(a.single_field->size() > a.ground_field->size());
  CHECK(a.obstacle_points == b.obstacle_points);

  const SceneModel c =
      build_scene(cloud, SystemModel::preset("roomba"), config, a.ground_field, a.single_field);
  CHECK(c.ground_field == a.ground_field);
  CHECK(c.obstacle_points.size() < a.obstacle_points.size());
}

TEST_CASE("training sets are capped") {
  const LabelledCloud cloud = synth_scene(pillar_room(), 0);
  SceneConfig config;
  config.max_training_points = 300;
  const SceneModel scene = build_scene(cloud, SystemModel::preset("human"), config);
  CHECK(scene.ground_field->size() <= 300);
  CHECK(scene.obstacle_field->size() <= 300);
}

TEST_CASE("scene cache round trip") {
  const LabelledCloud cloud = synth_scene(pillar_room(), 0);
  SceneConfig config;
  config.build_single_field = true;
  const SceneModel scene = build_scene(cloud, SystemModel::preset("human"), config);
  const auto path = std::filesystem::temp_directory_path() / "gpnav_test_scene.json";
  save_scene(scene, path);
  const SceneModel back = load_scene(path);

  CHECK(back.system.name == "human");
  CHECK(back.system.radius == scene.system.radius);
  CHECK(back.bounds.lo == scene.bounds.lo);
  CHECK(back.bounds.hi == scene.bounds.hi);
  CHECK(back.obstacle_points == scene.obstacle_points);
  CHECK(back.quadtree.leaves().size() == scene.quadtree.leaves().size());
  CHECK(back.graph.edge_count() == scene.graph.edge_count());
  REQUIRE(back.single_field);
  for (const Point3& q : {Point3(0.5, 0.5, 2.0), Point3(2.5, 1.0, 1.5), Point3(1.5, 0.9, 0.3)}) {
    CHECK(back.ground_distance(q) == scene.ground_distance(q));
    CHECK(back.obstacle_distance(q) == scene.obstacle_distance(q));
    CHECK(back.single_field->distance(q) == scene.single_field->distance(q));
  }

  {
    std::ofstream out(path);
    out << "{\"format\": \"something-else\", \"version\": 1}";
  }
  try {
    load_scene(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
  }
  {
    std::ofstream out(path);
    out << "{not json";
  }
  CHECK_THROWS_AS(load_scene(path), Error);
  try {
    load_scene("/nonexistent_gpnav_dir/scene.json");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}
