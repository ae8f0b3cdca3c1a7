// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "fixtures.hpp"
#include "oracles.hpp"

#include "gpnav/cloud.hpp"
#include "gpnav/error.hpp"
#include "gpnav/freespace.hpp"
#include "gpnav/gpdf.hpp"
#include "gpnav/harness.hpp"
#include "gpnav/optimizer.hpp"
#include "gpnav/scene.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

using namespace gpnav;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, std::optional<double> budget_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("threw: ") + e.what()};
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = !budget_s || elapsed < *budget_s;
  const bool pass = v.pass && in_time;
  failures += !pass;
  std::printf("criterion %d %s  %s: %s [%.2f s", id, pass ? "PASS" : "FAIL", name, v.detail.c_str(), elapsed);
  if (budget_s) std::printf(" / budget %.0f s%s", *budget_s, in_time ? "" : ", over budget");
  std::printf("]\n");
  std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// --- shared scenes --------------------------------------------------------

struct ClutteredRoom {
  LabelledCloud step_cloud, flat_cloud;
  SceneModel human_step, human_flat, roomba_flat;
};

const ClutteredRoom& cluttered_room() {
  static const ClutteredRoom room = [] {
    const SceneSpec spec = load_scene_spec(std::string(GPNAV_SCENE_DIR) + "/cluttered_room.json");
    SceneSpec flat = spec;
    flat.omit_steps = true;
    ClutteredRoom r;
    r.step_cloud = synth_scene(spec, 1);
    r.flat_cloud = synth_scene(flat, 1);
    SceneConfig config;
    config.build_single_field = true;
    const auto ground_step = fit_ground_field(r.step_cloud, config);
    const auto single_step = fit_single_field(r.step_cloud, config);
    const auto ground_flat = fit_ground_field(r.flat_cloud, config);
    const auto single_flat = fit_single_field(r.flat_cloud, config);
    r.human_step = build_scene(r.step_cloud, SystemModel::preset("human"), config, ground_step, single_step);
    r.human_flat = build_scene(r.flat_cloud, SystemModel::preset("human"), config, ground_flat, single_flat);
    r.roomba_flat = build_scene(r.flat_cloud, SystemModel::preset("roomba"), config, ground_flat, single_flat);
    return r;
  }();
  return room;
}

// Every optimizer run made here goes through this check.
struct ContractLog {
  int runs = 0;
  int violations = 0;
};
ContractLog contract;

OptimResult checked_optimize(const Trajectory& init, const CostFields& fields, const ChompConfig& config) {
  OptimResult r = optimize(init, fields, config);
  ++contract.runs;
  bool ok = !r.cost_history.empty();
  for (std::size_t k = 1; k < r.cost_history.size(); ++k) ok &= r.cost_history[k] <= r.cost_history[k - 1];
  ok &= (r.trajectory.waypoints.row(0).array() == init.waypoints.row(0).array()).all();
  ok &= (r.trajectory.waypoints.row(init.size() - 1).array() == init.waypoints.row(init.size() - 1).array()).all();
  contract.violations += !ok;
  return r;
}

// --- criteria -------------------------------------------------------------

Verdict reverting_exactness() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1), len(0.05, 2.0), frac(0, 3);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const int dim = i % 2 ? 2 : 3;
    FitOptions opts;
    opts.lengthscale = len(rng);
    opts.noise_variance = 0;
    Eigen::MatrixXd row(1, dim);
    for (int k = 0; k < dim; ++k) row(0, k) = u(rng);
    const GpdfModel m = GpdfModel::fit(row, opts);
    Eigen::VectorXd dir(dim);
    for (int k = 0; k < dim; ++k) dir[k] = u(rng);
    dir.normalize();
    const double d = frac(rng) * *opts.lengthscale;
    const Eigen::VectorXd q = row.row(0).transpose() + d * dir;
    worst = std::max(worst, std::abs(m.distance(QueryVec(q)) - (q - row.row(0).transpose()).norm()));
  }
  return {worst < 1e-9, fmt("max |err| %.2e over 1000 queries", worst)};
}

Points3 all_points(const LabelledCloud& c) {
  Points3 out = c.ground;
  out.insert(out.end(), c.nonground.begin(), c.nonground.end());
  return out;
}

Verdict distance_oracle() {
  // Lengthscale of the synthetic scenes (default rule at 0.1 m spacing).
  const double l = 0.2, s = l / 2;
  std::vector<std::pair<std::string, Points3>> surfaces;
  surfaces.emplace_back("plane", oracle::sample_plane_z(0, 0, 2, 0, 2, s));
  surfaces.emplace_back("sphere", oracle::sample_sphere(Point3(0, 0, 0), 0.5, s));
  surfaces.emplace_back("box", oracle::sample_box_surface(Point3(0, 0, 0), Point3(1, 0.8, 0.6), s));
  {
    SceneSpec spec;
    spec.room_size = {3.0, 2.0};
    spec.walls = false;
    spec.spacing = s;
    spec.boxes.push_back({Point3(1.0, 1.0, 0.75), Point3(0.3, 0.3, 1.5)});
    spec.boxes.push_back({Point3(2.0, 1.0, 0.75), Point3(0.3, 0.3, 1.5)});
    surfaces.emplace_back("two-pillar", all_points(synth_scene(spec, 0)));
  }
  {
    SceneSpec spec;
    spec.room_size = {3.0, 2.0};
    spec.walls = false;
    spec.spacing = s;
    spec.ground = GroundProfile::kStepped;
    spec.steps.push_back({Point2(1.5, 1.0), Point2(1.0, 1.2), 0.35});
    surfaces.emplace_back("step", all_points(synth_scene(spec, 0)));
  }

  const double tol = std::max(0.05, 0.1 * l);
  bool pass = true;
  std::ostringstream detail;
  std::mt19937_64 rng(2);
  for (const auto& [name, pts] : surfaces) {
    FitOptions opts;
    opts.lengthscale = l;
    opts.keep_factor = false;
    const GpdfModel m = GpdfModel::fit(to_rows(pts), opts);
    Point3 lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    lo.array() -= 2 * l;
    hi.array() += 2 * l;
    std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y()), uz(lo.z(), hi.z());
    int n = 0, over = 0;
    double worst = 0;
    while (n < 500) {
      const Point3 q(ux(rng), uy(rng), uz(rng));
      const double truth = oracle::nn_distance(pts, q);
      if (truth < 0.2 * l || truth > 2 * l) continue;
      const double err = std::abs(m.distance(q) - truth);
      worst = std::max(worst, err);
      over += err > tol;
      ++n;
    }
    pass &= worst <= tol;
    detail << name << " " << fmt("%.4f", worst) << " (" << over << " over) ";
  }
  detail << fmt("[max |err| per surface, tol %.3f m, 500 queries each]", tol);
  return {pass, detail.str()};
}

Verdict gradient_checks() {
  int gp_checked = 0, gp_bad = 0;
  double gp_worst = 0;
  std::mt19937_64 rng(3);
  for (int model_id = 0; model_id < 10; ++model_id) {
    const int dim = model_id % 2 ? 2 : 3;
    const GpdfModel m =
        GpdfModel::fit(fixture::random_rows(40 + 10 * model_id, dim, 900 + model_id, 2.0), FitOptions{});
    const double l = m.params().lengthscale;
    std::uniform_real_distribution<double> u(-0.5, 2.5);
    for (int here = 0; here < 12;) {
      QueryVec q(dim);
      for (int k = 0; k < dim; ++k) q[k] = u(rng);
      const DistResult r = m.query(q);
      if (r.distance < 0.1 * l) continue;
      const Eigen::VectorXd fd = oracle::fd_gradient(
          [&](const Eigen::VectorXd& x) { return m.distance(QueryVec(x)); }, Eigen::VectorXd(q), 1e-4 * l);
      const double e = oracle::rel_err(Eigen::VectorXd(r.gradient), fd);
      gp_worst = std::max(gp_worst, e);
      gp_bad += !(e < 1e-3);
      ++here;
    }
    gp_checked += 12;
  }

  // Cost gradients over the cluttered room's fields, both dual and single.
  const SceneModel& scene = cluttered_room().human_step;
  const CostFields dual = scene_cost_fields(scene);
  const CostFields single{scene.single_field.get(), nullptr, scene.system.height};
  std::uniform_real_distribution<double> ux(0.3, 5.7), uy(0.3, 4.7), uz(1.0, 3.0), jitter(-0.3, 0.3), lam(0, 2);
  int cost_checked = 0, cost_bad = 0;
  double cost_worst = 0;
  while (cost_checked < 120) {
    const CostFields& fields = cost_checked % 3 == 2 ? single : dual;
    ChompConfig c = default_chomp_config(scene.system.height, scene.system.radius, 12);
    c.lambda_s = 0.1 * lam(rng);
    c.lambda_o = lam(rng);
    c.lambda_g = lam(rng);
    Trajectory t = resample_waypoints({Point3(ux(rng), uy(rng), uz(rng)), Point3(ux(rng), uy(rng), uz(rng))}, 12);
    for (int i = 1; i < 11; ++i)
      for (int k = 0; k < 3; ++k) t.waypoints(i, k) += jitter(rng);
    bool near_kink = false;
    for (int i = 0; i < t.size() && fields.obstacle; ++i) {
      const Point3 p = t.at(i);
      const double d = fields.obstacle->distance(QueryVec(p.head(fields.obstacle->dim())));
      near_kink |= std::abs(d - c.epsilon) < 1e-3;
    }
    if (near_kink) continue;
    const Eigen::MatrixX3d g = cost_gradient(t, fields, c);
    Eigen::MatrixX3d fd = Eigen::MatrixX3d::Zero(t.size(), 3);
    for (int i = 1; i < t.size() - 1; ++i)
      for (int k = 0; k < 3; ++k) {
        Trajectory a = t, b = t;
        a.waypoints(i, k) += 1e-5;
        b.waypoints(i, k) -= 1e-5;
        fd(i, k) = (total_cost(a, fields, c) - total_cost(b, fields, c)) / 2e-5;
      }
    const double e = oracle::rel_err(g, fd);
    cost_worst = std::max(cost_worst, e);
    cost_bad += !(e < 1e-3);
    ++cost_checked;
  }
  return {gp_bad == 0 && cost_bad == 0,
          fmt("distance gradient %d/%d within 1e-3 (worst %.1e); cost gradient %d/%d (worst %.1e)",
              gp_checked - gp_bad, gp_checked, gp_worst, cost_checked - cost_bad, cost_checked, cost_worst)};
}

Verdict graph_oracles() {
  int fixtures = 0, matched = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed, ++fixtures)
    matched += fixture::connectivity_matches(fixture::random_cell_points(100 + seed, 16, 0.25, 0.1 + 0.02 * seed),
                                             Box2(Point2(0, 0), Point2(4, 4)), 0.25);
  for (std::uint64_t seed = 0; seed < 5; ++seed, ++fixtures)
    matched += fixture::connectivity_matches(fixture::maze_points(seed, 0.25), Box2(Point2(0, 0), Point2(8, 8)), 0.25);

  int compared = 0, optimal = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const auto rg = oracle::random_graph(seed, 30 + static_cast<int>(seed % 40), 0.08 + 0.002 * (seed % 50));
    std::vector<std::vector<FreeCellGraph::Edge>> adj(rg.edges.size());
    for (std::size_t v = 0; v < rg.edges.size(); ++v)
      for (const auto& e : rg.edges[v]) adj[v].push_back({e.to, e.w});
    const int target = static_cast<int>(rg.edges.size()) - 1;
    const auto seq = astar_vertices(adj, rg.positions, 0, target);
    const double best = oracle::dijkstra(rg.edges, 0, target);
    if (std::isinf(best)) continue;
    ++compared;
    if (seq.empty() || seq.front() != 0 || seq.back() != target) continue;
    double cost = 0;
    for (std::size_t k = 1; k < seq.size(); ++k) {
      double w = std::numeric_limits<double>::infinity();
      for (const auto& e : adj[seq[k - 1]])
        if (e.to == seq[k]) w = std::min(w, e.weight);
      cost += w;
    }
    optimal += std::abs(cost - best) <= 1e-12 * std::max(1.0, best);
  }
  return {matched == fixtures && compared >= 100 && optimal == compared,
          fmt("flood fill agrees on %d/%d fixtures; A* equals Dijkstra on %d/%d graphs", matched, fixtures, optimal,
              compared)};
}

Verdict optimizer_contract() {
  const SceneModel& scene = cluttered_room().human_step;
  const ChompConfig c = default_chomp_config(scene.system.height, scene.system.radius);
  std::mt19937_64 rng(5);
  int skipped = 0;
  for (int run = 0; run < 40; ++run) {
    const Endpoints e = sample_free_start_goal(scene, scene.system, rng);
    Path2D path;
    try {
      path = astar(scene.quadtree, scene.graph, e.start.head<2>(), e.goal.head<2>());
    } catch (const Error&) {
      ++skipped;
      continue;
    }
    Points3 seed;
    for (const auto& p : path.waypoints) seed.emplace_back(p.x(), p.y(), e.start.z());
    Trajectory init = resample_waypoints(seed, c.q);
    init.waypoints.row(c.q - 1) = e.goal.transpose();
    checked_optimize(init, scene_cost_fields(scene), c);
  }
  return {contract.violations == 0 && contract.runs > 0,
          fmt("%d optimizer runs so far, %d violate descent or endpoint pinning (%d disconnected draws skipped)",
              contract.runs, contract.violations, skipped)};
}

Verdict step_scene() {
  SceneSpec spec;
  spec.room_size = {4.0, 3.0};
  spec.ground = GroundProfile::kStepped;
  spec.steps.push_back({Point2(3.0, 1.5), Point2(1.0, 1.2), 0.35});
  const SceneModel scene = build_scene(synth_scene(spec, 1), SystemModel::preset("human"), SceneConfig{});
  const Point3 start = lift_endpoint(scene, Point2(0.8, 1.5));
  const Point3 goal = lift_endpoint(scene, Point2(3.0, 1.5));

  const PlanOutcome ours = run_planner(PlannerId::kOurs, scene, start, goal, PlannerConfig{});
  if (!ours.trajectory) return {false, "ours failed: " + ours.message};
  const bool ours_ok = check_feasible(*ours.trajectory, scene, scene.system).ok;

  // Replay the optimizer on the planner's seed so the contract sees this run.
  {
    const Path2D path = astar(scene.quadtree, scene.graph, start.head<2>(), goal.head<2>());
    const ChompConfig c = default_chomp_config(scene.system.height, scene.system.radius);
    Points3 flat;
    for (const auto& p : path.waypoints) flat.emplace_back(p.x(), p.y(), 0.0);
    Trajectory init = resample_waypoints(flat, c.q);
    for (int i = 1; i < c.q - 1; ++i)
      init.waypoints(i, 2) = lift_endpoint(scene, init.waypoints.row(i).head<2>().transpose()).z();
    init.waypoints.row(0) = start.transpose();
    init.waypoints.row(c.q - 1) = goal.transpose();
    const OptimResult replay = checked_optimize(init, scene_cost_fields(scene), c);
    if (replay.trajectory.waypoints != ours.trajectory->waypoints) return {false, "replay differs from run_planner"};
  }

  std::string offsets;
  bool offsets_fail = true;
  for (PlannerId id : {PlannerId::kAstarOffset, PlannerId::kPrmOffset}) {
    const PlanOutcome out = run_planner(id, scene, start, goal, PlannerConfig{}, 7);
    const bool feasible = out.trajectory && check_feasible(*out.trajectory, scene, scene.system).ok;
    offsets_fail &= !feasible;
    offsets += fmt(", %s %s", to_string(id), !out.trajectory ? "failed to plan" : feasible ? "feasible" : "infeasible");
  }

  // Ground distance is Euclidean, so the platform edge pulls the trajectory
  // up from sqrt(2.35^2 - 2^2) ~ 1.24 m before the riser. "Before" waypoints
  // lie beyond that reach.
  double before = 0, on = 0;
  int nb = 0, no = 0;
  for (int i = 0; i < ours.trajectory->size(); ++i) {
    const Point3 p = ours.trajectory->at(i);
    if (p.x() < 1.2) before += p.z(), ++nb;
    if (p.x() > 2.7 && std::abs(p.y() - 1.5) < 0.5) on += p.z(), ++no;
  }
  if (nb == 0 || no == 0) return {false, "trajectory does not cover both sides of the step"};
  const double rise = on / no - before / nb;
  const bool rise_ok = std::abs(rise - 0.35) <= 0.10;
  return {ours_ok && offsets_fail && rise_ok,
          fmt("ours %s, rise %.3f m", ours_ok ? "feasible" : "infeasible", rise) + offsets};
}

EvalReport monte_carlo_report;

Verdict monte_carlo() {
  const ClutteredRoom& room = cluttered_room();
  const std::vector<EvalCase> cases = {
      {"step", &room.human_step, all_planners(), std::nullopt},
      {"flat", &room.human_flat, {PlannerId::kAstarOffset, PlannerId::kPrmOffset}, std::nullopt},
      {"flat", &room.roomba_flat, all_planners(), std::nullopt},
  };
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  monte_carlo_report = monte_carlo_eval(cases, 100, 42, PlannerConfig{}, workers);
  const EvalReport& r = monte_carlo_report;
  std::printf("%s", report_to_csv(r).c_str());

  bool pass = true;
  std::ostringstream why;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      why << " " << what << ";";
    }
  };
  for (const auto& [label, system] : {std::pair{"step", "human"}, std::pair{"flat", "roomba"}}) {
    const EvalRow* ours = r.find(label, system, PlannerId::kOurs);
    const EvalRow* single = r.find(label, system, PlannerId::kChompSingleGpdf);
    need(ours->collision_free_rate >= 0.95, std::string("ours collision-free on ") + system);
    need(ours->feasible_rate >= 0.95, std::string("ours feasible on ") + system);
    need(single->collision_free_rate >= 0.90, std::string("single-field collision-free on ") + system);
    need(single->feasible_rate <= 0.50, std::string("single-field feasible on ") + system);
  }
  for (PlannerId id : {PlannerId::kAstarOffset, PlannerId::kPrmOffset}) {
    need(r.find("flat", "human", id)->feasible_rate >= 0.95, std::string(to_string(id)) + " feasible on flat human");
    need(r.find("flat", "roomba", id)->feasible_rate >= 0.95, std::string(to_string(id)) + " feasible on flat roomba");
    need(r.find("step", "human", id)->feasible_rate < 0.95, std::string(to_string(id)) + " infeasible on step");
  }
  return {pass, pass ? "all rate thresholds met (table above)" : "missed:" + why.str()};
}

Verdict height_tracking() {
  double sum = 0;
  int n = 0;
  for (const auto& t : monte_carlo_report.trials)
    if (t.system == "human" && t.planner == PlannerId::kOurs && t.outcome == "ok" && t.collision_free && t.feasible) {
      sum += *t.avg_ground;
      ++n;
    }
  if (n == 0) return {false, "no successful human trajectories"};
  const double mean = sum / n;
  return {std::abs(mean - 2.0) <= 0.1, fmt("mean avg ground distance %.4f m over %d trajectories", mean, n)};
}

Verdict overhang() {
  SceneSpec spec;
  spec.room_size = {3.0, 3.0};
  spec.boxes.push_back({Point3(1.5, 1.5, 0.5), Point3(1.2, 1.2, 0.04)});
  const LabelledCloud cloud = synth_scene(spec, 0);
  Points3 slab;
  for (const auto& p : cloud.nonground)
    if (std::abs(p.z() - 0.5) < 0.05 && std::abs(p.x() - 1.5) <= 0.61 && std::abs(p.y() - 1.5) <= 0.61)
      slab.push_back(p);
  if (slab.empty()) return {false, "no slab points"};
  const auto ground = fit_ground_field(cloud, SceneConfig{});
  const Points3 roomba = classify_obstacles(cloud.nonground, *ground, SystemModel::preset("roomba").height);
  const Points3 human = classify_obstacles(cloud.nonground, *ground, SystemModel::preset("human").height);
  auto count_in = [&](const Points3& set) {
    int c = 0;
    for (const auto& p : slab) c += std::find(set.begin(), set.end(), p) != set.end();
    return c;
  };
  const int in_roomba = count_in(roomba), in_human = count_in(human);
  const int n = static_cast<int>(slab.size());
  return {in_roomba == 0 && in_human == n,
          fmt("slab points in X_o: roomba %d/%d, human %d/%d", in_roomba, n, in_human, n)};
}

}  // namespace

int main() {
  criterion(1, "reverting exactness", 1.0, reverting_exactness);
  criterion(2, "distance-field oracle", 30.0, distance_oracle);
  criterion(3, "gradient checks", 60.0, gradient_checks);
  criterion(4, "graph and search oracles", 30.0, graph_oracles);
  criterion(6, "step scene", 120.0, step_scene);
  criterion(7, "monte-carlo direction", 900.0, monte_carlo);
  criterion(8, "height tracking", std::nullopt, height_tracking);
  criterion(9, "roomba overhang", std::nullopt, overhang);
  // Runs last so that it also covers the optimizer runs made above.
  criterion(5, "optimizer contract", std::nullopt, optimizer_contract);
  std::printf("%s\n", failures == 0 ? "ALL PASS" : fmt("%d criteria failed", failures).c_str());
  return failures == 0 ? 0 : 1;
}
