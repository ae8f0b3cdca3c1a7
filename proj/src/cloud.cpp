#include "gpnav/cloud.hpp"
#include "gpnav/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>

namespace gpnav {

LabelledCloud LabelledCloud::from_parts(Points3 ground, Points3 nonground) {
  LabelledCloud cloud;
  cloud.ground = std::move(ground);
  cloud.nonground = std::move(nonground);
  for (const auto& p : cloud.ground) cloud.bounds.extend(p);
  for (const auto& p : cloud.nonground) cloud.bounds.extend(p);
  return cloud;
}

Points3 add_gaussian_noise(const Points3& points, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw validation_error("noise sigma must be >= 0");
  if (sigma == 0.0) return points;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Points3 out;
  out.reserve(points.size());
  for (const auto& p : points) out.emplace_back(p.x() + normal(rng), p.y() + normal(rng), p.z() + normal(rng));
  return out;
}

namespace {

template <int Dim>
struct VoxelKey {
  std::array<std::int64_t, Dim> idx;
  bool operator==(const VoxelKey&) const = default;
};

template <int Dim>
struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey<Dim>& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (auto v : k.idx) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

template <int Dim>
std::vector<Eigen::Matrix<double, Dim, 1>> downsample_impl(
    const std::vector<Eigen::Matrix<double, Dim, 1>>& points, double cell) {
  using Vec = Eigen::Matrix<double, Dim, 1>;
  if (!(cell > 0.0)) throw validation_error("voxel cell must be > 0");
  std::unordered_map<VoxelKey<Dim>, std::size_t, VoxelKeyHash<Dim>> slot;
  std::vector<Vec> sums;
  std::vector<std::size_t> counts;
  slot.reserve(points.size());
  for (const auto& p : points) {
    VoxelKey<Dim> key;
    for (int d = 0; d < Dim; ++d) key.idx[d] = static_cast<std::int64_t>(std::floor(p[d] / cell));
    auto [it, inserted] = slot.try_emplace(key, sums.size());
    if (inserted) {
      sums.push_back(Vec::Zero());
      counts.push_back(0);
    }
    sums[it->second] += p;
    ++counts[it->second];
  }
  std::vector<Vec> out(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i)
    out[i] = counts[i] == 1 ? sums[i] : Vec(sums[i] / static_cast<double>(counts[i]));
  return out;
}

}  // namespace

Points3 voxel_downsample(const Points3& points, double cell) { return downsample_impl<3>(points, cell); }
Points2 voxel_downsample(const Points2& points, double cell) { return downsample_impl<2>(points, cell); }

LabelledCloud segment_ground_by_height(const Points3& points, double z_threshold) {
  Points3 ground, nonground;
  for (const auto& p : points) (p.z() <= z_threshold ? ground : nonground).push_back(p);
  return LabelledCloud::from_parts(std::move(ground), std::move(nonground));
}

// ---------------------------------------------------------------------------
// SceneSpec

double SceneSpec::terrain_height(double x, double y) const {
  if (ground != GroundProfile::kHeightmap) return 0.0;
  const auto& hm = heightmap;
  const double fx = std::clamp(x / room_size.x(), 0.0, 1.0) * (hm.nx - 1);
  const double fy = std::clamp(y / room_size.y(), 0.0, 1.0) * (hm.ny - 1);
  const int i0 = std::min(static_cast<int>(std::floor(fx)), hm.nx - 2);
  const int j0 = std::min(static_cast<int>(std::floor(fy)), hm.ny - 2);
  const double tx = fx - i0, ty = fy - j0;
  auto at = [&](int i, int j) { return hm.heights[static_cast<std::size_t>(j) * hm.nx + i]; };
  return (1 - tx) * (1 - ty) * at(i0, j0) + tx * (1 - ty) * at(i0 + 1, j0) +
         (1 - tx) * ty * at(i0, j0 + 1) + tx * ty * at(i0 + 1, j0 + 1);
}

void SceneSpec::validate() const {
  auto fail = [](const std::string& path, const std::string& why) {
    return validation_error("scene spec " + path + ": " + why);
  };
  if (!(room_size.x() > 0 && room_size.y() > 0) || !room_size.allFinite())
    throw fail("$.room.size", "room extents must be positive");
  if (!(spacing > 0) || !std::isfinite(spacing)) throw fail("$.spacing", "must be > 0");
  if (!(jitter >= 0 && jitter < 1)) throw fail("$.jitter", "must lie in [0, 1)");
  if (!(wall_height > 0)) throw fail("$.room.wall_height", "must be > 0");
  const double top = std::max(wall_height, ceiling_height.value_or(wall_height));
  if (ceiling_height && !(*ceiling_height > 0)) throw fail("$.room.ceiling_height", "must be > 0");
  if (ground == GroundProfile::kHeightmap) {
    if (heightmap.nx < 2 || heightmap.ny < 2) throw fail("$.ground", "heightmap needs nx, ny >= 2");
    if (heightmap.heights.size() != static_cast<std::size_t>(heightmap.nx) * heightmap.ny)
      throw fail("$.ground.heights", "expected nx*ny values");
  }
  if (ground == GroundProfile::kStepped && steps.empty())
    throw fail("$.steps", "stepped ground needs at least one step");

  auto inside_xy = [&](double lo_x, double hi_x, double lo_y, double hi_y) {
    return lo_x >= 0 && lo_y >= 0 && hi_x <= room_size.x() && hi_y <= room_size.y();
  };
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    const std::string path = "$.boxes[" + std::to_string(i) + "]";
    if (!b.center.allFinite() || !b.size.allFinite()) throw fail(path, "non-finite geometry");
    if ((b.size.array() <= 0).any()) throw fail(path + ".size", "degenerate box (zero or negative size)");
    const Point3 lo = b.center - 0.5 * b.size, hi = b.center + 0.5 * b.size;
    if (!inside_xy(lo.x(), hi.x(), lo.y(), hi.y()) || lo.z() < -1e-12 || hi.z() > top + 1e-12)
      throw fail(path, "box lies outside the room extents");
  }
  for (std::size_t i = 0; i < spheres.size(); ++i) {
    const auto& s = spheres[i];
    const std::string path = "$.spheres[" + std::to_string(i) + "]";
    if (!s.center.allFinite() || !(s.radius > 0)) throw fail(path + ".radius", "degenerate sphere");
    if (!inside_xy(s.center.x() - s.radius, s.center.x() + s.radius, s.center.y() - s.radius,
                   s.center.y() + s.radius) ||
        s.center.z() - s.radius < -1e-12 || s.center.z() + s.radius > top + 1e-12)
      throw fail(path, "sphere lies outside the room extents");
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    const std::string path = "$.steps[" + std::to_string(i) + "]";
    if ((s.size.array() <= 0).any() || !(s.height > 0)) throw fail(path, "degenerate step");
    const Point2 lo = s.center - 0.5 * s.size, hi = s.center + 0.5 * s.size;
    if (!inside_xy(lo.x(), hi.x(), lo.y(), hi.y()) || s.height > top)
      throw fail(path, "step lies outside the room extents");
  }
}

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key))
    throw validation_error("scene spec " + path + "." + key + ": missing required field");
  return obj.at(key);
}

double number_at(const json& v, const std::string& path) {
  if (!v.is_number()) throw validation_error("scene spec " + path + ": expected a number");
  return v.get<double>();
}

template <int N>
Eigen::Matrix<double, N, 1> vec_at(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != N)
    throw validation_error("scene spec " + path + ": expected an array of " + std::to_string(N) +
                           " numbers");
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = number_at(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

const json& array_at(const json& doc, const char* key) {
  static const json kEmpty = json::array();
  if (!doc.contains(key)) return kEmpty;
  const json& v = doc.at(key);
  if (!v.is_array()) throw validation_error(std::string("scene spec $.") + key + ": expected an array");
  return v;
}

}  // namespace

SceneSpec scene_spec_from_json(const json& doc) {
  if (!doc.is_object()) throw validation_error("scene spec $: expected an object");
  SceneSpec spec;
  const json& room = require(doc, "room", "$");
  spec.room_size = vec_at<2>(require(room, "size", "$.room"), "$.room.size");
  if (room.contains("walls")) {
    if (!room["walls"].is_boolean()) throw validation_error("scene spec $.room.walls: expected a boolean");
    spec.walls = room["walls"].get<bool>();
  }
  if (room.contains("wall_height")) spec.wall_height = number_at(room["wall_height"], "$.room.wall_height");
  if (room.contains("ceiling_height") && !room["ceiling_height"].is_null())
    spec.ceiling_height = number_at(room["ceiling_height"], "$.room.ceiling_height");

  if (doc.contains("spacing")) spec.spacing = number_at(doc["spacing"], "$.spacing");
  if (doc.contains("jitter")) spec.jitter = number_at(doc["jitter"], "$.jitter");
  if (doc.contains("omit_steps")) {
    if (!doc["omit_steps"].is_boolean()) throw validation_error("scene spec $.omit_steps: expected a boolean");
    spec.omit_steps = doc["omit_steps"].get<bool>();
  }

  const json& boxes = array_at(doc, "boxes");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const std::string path = "$.boxes[" + std::to_string(i) + "]";
    spec.boxes.push_back({vec_at<3>(require(boxes[i], "center", path), path + ".center"),
                          vec_at<3>(require(boxes[i], "size", path), path + ".size")});
  }
  const json& spheres = array_at(doc, "spheres");
  for (std::size_t i = 0; i < spheres.size(); ++i) {
    const std::string path = "$.spheres[" + std::to_string(i) + "]";
    spec.spheres.push_back({vec_at<3>(require(spheres[i], "center", path), path + ".center"),
                            number_at(require(spheres[i], "radius", path), path + ".radius")});
  }
  const json& steps = array_at(doc, "steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string path = "$.steps[" + std::to_string(i) + "]";
    spec.steps.push_back({vec_at<2>(require(steps[i], "center", path), path + ".center"),
                          vec_at<2>(require(steps[i], "size", path), path + ".size"),
                          number_at(require(steps[i], "height", path), path + ".height")});
  }

  if (doc.contains("ground")) {
    const json& g = doc["ground"];
    const std::string type = g.is_string() ? g.get<std::string>()
                             : g.is_object() && g.contains("type") && g["type"].is_string()
                                 ? g["type"].get<std::string>()
                                 : std::string();
    if (type == "flat") {
      spec.ground = GroundProfile::kFlat;
    } else if (type == "stepped") {
      spec.ground = GroundProfile::kStepped;
    } else if (type == "heightmap") {
      spec.ground = GroundProfile::kHeightmap;
      spec.heightmap.nx = static_cast<int>(number_at(require(g, "nx", "$.ground"), "$.ground.nx"));
      spec.heightmap.ny = static_cast<int>(number_at(require(g, "ny", "$.ground"), "$.ground.ny"));
      const json& h = require(g, "heights", "$.ground");
      if (!h.is_array()) throw validation_error("scene spec $.ground.heights: expected an array");
      for (std::size_t i = 0; i < h.size(); ++i)
        spec.heightmap.heights.push_back(number_at(h[i], "$.ground.heights[" + std::to_string(i) + "]"));
    } else {
      throw validation_error("scene spec $.ground: expected one of flat | stepped | heightmap");
    }
  }
  spec.validate();
  return spec;
}

json scene_spec_to_json(const SceneSpec& spec) {
  json doc;
  doc["room"] = {{"size", {spec.room_size.x(), spec.room_size.y()}},
                 {"walls", spec.walls},
                 {"wall_height", spec.wall_height}};
  if (spec.ceiling_height) doc["room"]["ceiling_height"] = *spec.ceiling_height;
  doc["spacing"] = spec.spacing;
  doc["jitter"] = spec.jitter;
  doc["omit_steps"] = spec.omit_steps;
  doc["boxes"] = json::array();
  for (const auto& b : spec.boxes)
    doc["boxes"].push_back({{"center", {b.center.x(), b.center.y(), b.center.z()}},
                            {"size", {b.size.x(), b.size.y(), b.size.z()}}});
  doc["spheres"] = json::array();
  for (const auto& s : spec.spheres)
    doc["spheres"].push_back({{"center", {s.center.x(), s.center.y(), s.center.z()}}, {"radius", s.radius}});
  doc["steps"] = json::array();
  for (const auto& s : spec.steps)
    doc["steps"].push_back({{"center", {s.center.x(), s.center.y()}},
                            {"size", {s.size.x(), s.size.y()}},
                            {"height", s.height}});
  switch (spec.ground) {
    case GroundProfile::kFlat: doc["ground"] = "flat"; break;
    case GroundProfile::kStepped: doc["ground"] = "stepped"; break;
    case GroundProfile::kHeightmap:
      doc["ground"] = {{"type", "heightmap"},
                       {"nx", spec.heightmap.nx},
                       {"ny", spec.heightmap.ny},
                       {"heights", spec.heightmap.heights}};
      break;
  }
  return doc;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open scene spec '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw validation_error("scene spec '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return scene_spec_from_json(doc);
}

// ---------------------------------------------------------------------------
// Synthesis

namespace {

/// n >= 2 evenly spaced samples on [a, b] with gap <= step.
std::vector<double> linspace_max_step(double a, double b, double step) {
  const double len = b - a;
  if (len <= 0) return {a};
  const int n = static_cast<int>(std::ceil(len / step - 1e-9)) + 1;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = i + 1 == n ? b : a + len * i / (n - 1);
  return out;
}

class Sampler {
 public:
  Sampler(double spacing, double jitter, std::uint64_t seed)
      : spacing_(spacing), jitter_(jitter), rng_(seed) {}

  double spacing() const { return spacing_; }

  /// In-surface offset, clamped to [lo, hi].
  double jittered(double v, double lo, double hi) {
    if (jitter_ <= 0) return v;
    std::uniform_real_distribution<double> u(-0.5 * jitter_ * spacing_, 0.5 * jitter_ * spacing_);
    return std::clamp(v + u(rng_), lo, hi);
  }

  /// Axis-aligned rectangle at constant `axis` coordinate.
  void rect(int axis, double value, double a0, double a1, double b0, double b1, Points3& out) {
    const int ia = (axis + 1) % 3, ib = (axis + 2) % 3;
    for (double a : linspace_max_step(a0, a1, spacing_))
      for (double b : linspace_max_step(b0, b1, spacing_)) {
        Point3 p;
        p[axis] = value;
        p[ia] = jittered(a, a0, a1);
        p[ib] = jittered(b, b0, b1);
        out.push_back(p);
      }
  }

  /// Vertical rectangle whose rows start half a spacing above `z0`.
  void wall(int axis, double value, double a0, double a1, double z0, double z1, Points3& out) {
    if (z1 - z0 <= 0.5 * spacing_) return;
    const int ia = axis == 0 ? 1 : 0;
    for (double a : linspace_max_step(a0, a1, spacing_))
      for (double z : linspace_max_step(z0 + 0.5 * spacing_, z1, spacing_)) {
        Point3 p;
        p[axis] = value;
        p[ia] = jittered(a, a0, a1);
        p.z() = z;
        out.push_back(p);
      }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  double spacing_;
  double jitter_;
  std::mt19937_64 rng_;
};

bool in_footprint(const Point2& lo, const Point2& hi, double x, double y) {
  return x >= lo.x() && x <= hi.x() && y >= lo.y() && y <= hi.y();
}

}  // namespace

LabelledCloud synth_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  const double s = spec.spacing;
  Sampler sampler(s, spec.jitter, seed);
  const double sx = spec.room_size.x(), sy = spec.room_size.y();

  struct Platform {
    Point2 lo, hi;
    double top;
  };
  std::vector<Platform> platforms;
  if (!spec.omit_steps)
    for (const auto& st : spec.steps) {
      const Point2 lo = st.center - 0.5 * st.size, hi = st.center + 0.5 * st.size;
      platforms.push_back({lo, hi, spec.terrain_height(st.center.x(), st.center.y()) + st.height});
    }

  // Footprints of floor-standing boxes hide the floor beneath them.
  std::vector<std::pair<Point2, Point2>> hidden;
  for (const auto& b : spec.boxes) {
    const Point3 lo = b.center - 0.5 * b.size;
    if (lo.z() <= spec.terrain_height(b.center.x(), b.center.y()) + 0.5 * s)
      hidden.emplace_back(lo.head<2>(), (b.center + 0.5 * b.size).head<2>());
  }

  Points3 ground, nonground;

  for (double gx : linspace_max_step(0, sx, s))
    for (double gy : linspace_max_step(0, sy, s)) {
      const double x = sampler.jittered(gx, 0, sx), y = sampler.jittered(gy, 0, sy);
      bool covered = false;
      for (const auto& [lo, hi] : hidden)
        if (x > lo.x() && x < hi.x() && y > lo.y() && y < hi.y()) covered = true;
      if (covered) continue;
      double z = spec.terrain_height(x, y);
      for (const auto& pf : platforms)
        if (in_footprint(pf.lo, pf.hi, x, y)) z = std::max(z, pf.top);
      ground.emplace_back(x, y, z);
    }

  // Risers bridge floor and platform top, so they are traversable terrain.
  for (const auto& pf : platforms) {
    const double base = spec.terrain_height(0.5 * (pf.lo.x() + pf.hi.x()), 0.5 * (pf.lo.y() + pf.hi.y()));
    const int rows = static_cast<int>(std::ceil((pf.top - base) / s - 1e-9));
    for (int k = 1; k < rows; ++k) {
      const double z = base + (pf.top - base) * k / rows;
      for (double x : linspace_max_step(pf.lo.x(), pf.hi.x(), s)) {
        ground.emplace_back(x, pf.lo.y(), z);
        ground.emplace_back(x, pf.hi.y(), z);
      }
      const auto ys = linspace_max_step(pf.lo.y(), pf.hi.y(), s);
      for (std::size_t j = 1; j + 1 < ys.size(); ++j) {
        ground.emplace_back(pf.lo.x(), ys[j], z);
        ground.emplace_back(pf.hi.x(), ys[j], z);
      }
    }
  }

  if (spec.walls) {
    const double z0 = spec.terrain_height(0, 0);
    sampler.wall(0, 0.0, 0, sy, z0, spec.wall_height, nonground);
    sampler.wall(0, sx, 0, sy, z0, spec.wall_height, nonground);
    sampler.wall(1, 0.0, 0, sx, z0, spec.wall_height, nonground);
    sampler.wall(1, sy, 0, sx, z0, spec.wall_height, nonground);
  }
  if (spec.ceiling_height) sampler.rect(2, *spec.ceiling_height, 0, sx, 0, sy, nonground);

  for (const auto& b : spec.boxes) {
    const Point3 lo = b.center - 0.5 * b.size, hi = b.center + 0.5 * b.size;
    const bool on_floor = lo.z() <= spec.terrain_height(b.center.x(), b.center.y()) + 0.5 * s;
    sampler.rect(2, hi.z(), lo.x(), hi.x(), lo.y(), hi.y(), nonground);
    double side_z0 = lo.z();
    if (!on_floor) {
      sampler.rect(2, lo.z(), lo.x(), hi.x(), lo.y(), hi.y(), nonground);
    } else {
      side_z0 = spec.terrain_height(b.center.x(), b.center.y());
    }
    // Side rows start half a spacing above the bottom edge; the bottom face
    // (or the floor) already covers that edge.
    sampler.wall(0, lo.x(), lo.y(), hi.y(), side_z0, hi.z(), nonground);
    sampler.wall(0, hi.x(), lo.y(), hi.y(), side_z0, hi.z(), nonground);
    sampler.wall(1, lo.y(), lo.x(), hi.x(), side_z0, hi.z(), nonground);
    sampler.wall(1, hi.y(), lo.x(), hi.x(), side_z0, hi.z(), nonground);
  }

  for (const auto& sp : spec.spheres) {
    const int n = std::max(12, static_cast<int>(std::ceil(4 * M_PI * sp.radius * sp.radius / (s * s))));
    double phase = 0;
    if (spec.jitter > 0) phase = std::uniform_real_distribution<double>(0, 2 * M_PI)(sampler.rng());
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double th = golden * i + phase;
      const Point3 p = sp.center + sp.radius * Point3(r * std::cos(th), r * std::sin(th), z);
      if (p.z() > spec.terrain_height(p.x(), p.y()) + 0.5 * s) nonground.push_back(p);
    }
  }

  return LabelledCloud::from_parts(std::move(ground), std::move(nonground));
}

}  // namespace gpnav
