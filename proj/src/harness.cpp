#include "gpnav/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace gpnav {

const char* to_string(PlannerId id) {
  switch (id) {
    case PlannerId::kOurs: return "ours";
    case PlannerId::kAstarOffset: return "astar_offset";
    case PlannerId::kPrmOffset: return "prm_offset";
    case PlannerId::kChompSingleGpdf: return "chomp_single_gpdf";
  }
  return "unknown";
}

PlannerId planner_from_string(const std::string& name) {
  for (PlannerId id : all_planners())
    if (name == to_string(id)) return id;
  throw validation_error("unknown planner '" + name + "' (expected ours, astar_offset, prm_offset, chomp_single_gpdf)");
}

std::vector<PlannerId> all_planners() {
  return {PlannerId::kOurs, PlannerId::kAstarOffset, PlannerId::kPrmOffset, PlannerId::kChompSingleGpdf};
}

CheckResult check_collision_free(const Trajectory& traj, const SceneModel& scene, const SystemModel& system) {
  CheckResult r;
  if (!scene.obstacle_field) return r;
  for (int i = 0; i < traj.size(); ++i) {
    const double d = scene.obstacle_distance(traj.at(i));
    if (!(d >= system.radius)) r.violations.push_back({i, d, d - system.radius});
  }
  r.ok = r.violations.empty();
  return r;
}

CheckResult check_feasible(const Trajectory& traj, const SceneModel& scene, const SystemModel& system, double margin) {
  if (!(margin >= 0)) throw validation_error("feasibility margin must be >= 0");
  const double lo = (1.0 - margin) * system.height;
  const double hi = (1.0 + margin) * system.height;
  CheckResult r;
  for (int i = 0; i < traj.size(); ++i) {
    const double d = scene.ground_distance(traj.at(i));
    if (d < lo) r.violations.push_back({i, d, d - lo});
    else if (d > hi) r.violations.push_back({i, d, hi - d});
    else if (!std::isfinite(d)) r.violations.push_back({i, d, -std::numeric_limits<double>::infinity()});
  }
  r.ok = r.violations.empty();
  return r;
}

AvgDistances avg_distances(const Trajectory& traj, const SceneModel& scene) {
  if (traj.size() == 0) throw validation_error("cannot average over an empty trajectory");
  AvgDistances out;
  double obstacle = 0;
  for (int i = 0; i < traj.size(); ++i) {
    out.ground += scene.ground_distance(traj.at(i));
    if (scene.obstacle_field) obstacle += scene.obstacle_distance(traj.at(i));
  }
  out.ground /= traj.size();
  if (scene.obstacle_field) out.obstacle = obstacle / traj.size();
  return out;
}

Point3 lift_endpoint(const SceneModel& scene, const Point2& xy) {
  const double z = height_for_ground_distance(*scene.ground_field, xy, scene.system.height, scene.ground_span);
  return {xy.x(), xy.y(), z};
}

Endpoints sample_free_start_goal(const SceneModel& scene, const SystemModel& system, std::mt19937_64& rng) {
  constexpr int kMaxAttempts = 10000;
  const Box2 bounds = scene.plan_bounds();
  std::uniform_real_distribution<double> ux(bounds.lo.x(), bounds.hi.x());
  std::uniform_real_distribution<double> uy(bounds.lo.y(), bounds.hi.y());
  const double separation = 4.0 * scene.quadtree.min_cell();

  auto admissible = [&](const Point2& p) {
    const int leaf = scene.quadtree.leaf_at(p);
    if (leaf < 0 || scene.quadtree.nodes()[leaf].occupied) return false;
    return !scene.obstacle_field || scene.obstacle_field->distance(p) >= system.radius;
  };

  std::optional<Point2> start;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const Point2 p(ux(rng), uy(rng));
    if (!admissible(p)) continue;
    if (!start) {
      start = p;
    } else if ((p - *start).norm() >= separation) {
      return {lift_endpoint(scene, *start), lift_endpoint(scene, p)};
    }
  }
  throw validation_error("no free space: could not sample a start/goal pair in " + std::to_string(kMaxAttempts) +
                         " attempts");
}

ChompConfig PlannerConfig::chomp_for(const SystemModel& system) const {
  return chomp ? *chomp : default_chomp_config(system.height, system.radius);
}

namespace {

Trajectory offset_trajectory(const Path2D& path, double z, int q) {
  Points3 lifted;
  for (const auto& p : path.waypoints) lifted.emplace_back(p.x(), p.y(), z);
  Trajectory traj = resample_waypoints(lifted, q);
  traj.waypoints.col(2).setConstant(z);
  return traj;
}

// Resamples the 2D path, then lifts each interior waypoint onto the target
// ground distance. Endpoints are taken verbatim.
Trajectory follow_ground_trajectory(const SceneModel& scene, const Path2D& path, const Point3& start,
                                    const Point3& goal, int q) {
  Points3 flat;
  for (const auto& p : path.waypoints) flat.emplace_back(p.x(), p.y(), 0.0);
  Trajectory traj = resample_waypoints(flat, q);
  for (int i = 1; i < q - 1; ++i)
    traj.waypoints(i, 2) = lift_endpoint(scene, traj.waypoints.row(i).head<2>().transpose()).z();
  traj.waypoints.row(0) = start.transpose();
  traj.waypoints.row(q - 1) = goal.transpose();
  return traj;
}

}  // namespace

PlanOutcome run_planner(PlannerId id, const SceneModel& scene, const Point3& start, const Point3& goal,
                        const PlannerConfig& config, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  PlanOutcome out;
  try {
    ChompConfig chomp = config.chomp_for(scene.system);
    chomp.dt = 1.0;
    const Point2 s2 = start.head<2>();
    const Point2 g2 = goal.head<2>();
    switch (id) {
      case PlannerId::kOurs: {
        const Path2D path = astar(scene.quadtree, scene.graph, s2, g2);
        const Trajectory init = follow_ground_trajectory(scene, path, start, goal, chomp.q);
        OptimResult r = optimize(init, scene_cost_fields(scene), chomp);
        out.converged = r.converged;
        out.iterations = r.iterations;
        out.trajectory = std::move(r.trajectory);
        break;
      }
      case PlannerId::kAstarOffset: {
        const Path2D path = astar(scene.quadtree, scene.graph, s2, g2);
        out.trajectory = offset_trajectory(path, start.z(), chomp.q);
        break;
      }
      case PlannerId::kPrmOffset: {
        PrmOptions prm = config.prm;
        if (!(prm.cell > 0)) prm.cell = scene.quadtree.min_cell();
        prm.seed = seed;
        const Path2D path = prm_plan(project_to_plane(scene.obstacle_points), scene.plan_bounds(), s2, g2, prm);
        out.trajectory = offset_trajectory(path, start.z(), chomp.q);
        break;
      }
      case PlannerId::kChompSingleGpdf: {
        if (!scene.single_field) throw validation_error("scene was built without the single-field model");
        const Path2D path = astar(scene.quadtree, scene.graph, s2, g2);
        const Trajectory init = offset_trajectory(path, start.z(), chomp.q);
        const CostFields fields{scene.single_field.get(), nullptr, scene.system.height};
        OptimResult r = optimize(init, fields, chomp);
        out.converged = r.converged;
        out.iterations = r.iterations;
        out.trajectory = std::move(r.trajectory);
        break;
      }
    }
  } catch (const Error& e) {
    out.trajectory.reset();
    out.failure = e.kind();
    out.message = e.what();
  }
  out.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over the combined state
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const EvalRow* EvalReport::find(const std::string& label, const std::string& system, PlannerId planner) const {
  for (const auto& row : rows)
    if (row.label == label && row.system == system && row.planner == planner) return &row;
  return nullptr;
}

namespace {

std::string failure_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kBlockedEndpoint: return "blocked_endpoint";
    case ErrorKind::kDisconnected: return "disconnected";
    case ErrorKind::kNonConvergence: return "non_convergence";
    default: return to_string(kind);
  }
}

// Runs every planner of one case on one trial.
std::vector<TrialRecord> run_trial(const EvalCase& c, int trial, std::uint64_t seed, const PlannerConfig& config) {
  const SceneModel& scene = *c.scene;
  std::vector<TrialRecord> records;
  std::mt19937_64 rng(seed);
  std::optional<Endpoints> ends;
  std::string sample_error;
  try {
    ends = sample_free_start_goal(scene, scene.system, rng);
  } catch (const Error& e) {
    sample_error = e.what();
  }
  for (PlannerId planner : c.planners) {
    TrialRecord rec;
    rec.label = c.label;
    rec.system = scene.system.name;
    rec.planner = planner;
    rec.trial = trial;
    rec.seed = seed;
    if (!ends) {
      rec.outcome = "sampling_failed";
      rec.message = sample_error;
      records.push_back(std::move(rec));
      continue;
    }
    rec.start = ends->start;
    rec.goal = ends->goal;
    const PlanOutcome out = run_planner(planner, scene, ends->start, ends->goal, config, trial_seed(seed, 1));
    rec.runtime = out.runtime;
    rec.converged = out.converged;
    rec.iterations = out.iterations;
    if (!out.trajectory) {
      rec.outcome = out.failure ? failure_name(*out.failure) : "failed";
      rec.message = out.message;
    } else {
      rec.outcome = "ok";
      const CheckResult cf = check_collision_free(*out.trajectory, scene, scene.system);
      const CheckResult fe = check_feasible(*out.trajectory, scene, scene.system, config.feasibility_margin);
      rec.collision_free = cf.ok;
      rec.feasible = fe.ok;
      rec.collision_violations = static_cast<int>(cf.violations.size());
      rec.feasibility_violations = static_cast<int>(fe.violations.size());
      const AvgDistances avg = avg_distances(*out.trajectory, scene);
      rec.avg_ground = avg.ground;
      rec.avg_obstacle = avg.obstacle;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

EvalRow aggregate(const EvalCase& c, PlannerId planner, const std::vector<TrialRecord>& records, int n_trials) {
  EvalRow row;
  row.label = c.label;
  row.system = c.scene->system.name;
  row.planner = planner;
  row.trials = n_trials;
  int cf = 0, fe = 0, with_obstacle = 0;
  double ground = 0, obstacle = 0, runtime = 0;
  for (const auto& r : records) {
    if (r.label != row.label || r.system != row.system || r.planner != planner) continue;
    runtime += r.runtime;
    if (r.outcome != "ok") continue;
    ++row.completed;
    cf += r.collision_free;
    fe += r.feasible;
    ground += *r.avg_ground;
    if (r.avg_obstacle) {
      obstacle += *r.avg_obstacle;
      ++with_obstacle;
    }
  }
  row.collision_free_rate = static_cast<double>(cf) / n_trials;
  row.feasible_rate = static_cast<double>(fe) / n_trials;
  if (row.completed > 0) row.avg_dist_ground = ground / row.completed;
  if (with_obstacle > 0) row.avg_dist_obstacle = obstacle / with_obstacle;
  row.mean_runtime = runtime / n_trials;
  return row;
}

}  // namespace

EvalReport monte_carlo_eval(const std::vector<EvalCase>& cases, int n_trials, std::uint64_t seed,
                            const PlannerConfig& config, int workers) {
  if (n_trials < 1) throw validation_error("n_trials must be >= 1");
  for (const auto& c : cases)
    if (!c.scene) throw validation_error("evaluation case '" + c.label + "' has no scene");

  struct Job {
    std::size_t case_index;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t ci = 0; ci < cases.size(); ++ci)
    for (int t = 0; t < n_trials; ++t) jobs.push_back({ci, t});
  std::vector<std::vector<TrialRecord>> results(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++)
    {
      const EvalCase& c = cases[jobs[j].case_index];
      results[j] = run_trial(c, jobs[j].trial, trial_seed(seed, static_cast<std::uint64_t>(jobs[j].trial)),
                             c.config ? *c.config : config);
    }
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  EvalReport report;
  report.seed = seed;
  report.n_trials = n_trials;
  for (auto& r : results)
    for (auto& rec : r) report.trials.push_back(std::move(rec));
  for (const auto& c : cases)
    for (PlannerId planner : c.planners) report.rows.push_back(aggregate(c, planner, report.trials, n_trials));
  return report;
}

EvalReport monte_carlo_eval(const std::vector<const SceneModel*>& scenes, const std::vector<PlannerId>& planners,
                            int n_trials, std::uint64_t seed, const PlannerConfig& config, int workers) {
  std::vector<EvalCase> cases;
  for (const SceneModel* s : scenes) cases.push_back({"scene", s, planners, std::nullopt});
  return monte_carlo_eval(cases, n_trials, seed, config, workers);
}

namespace {

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json point_json(const Point3& p) { return {p.x(), p.y(), p.z()}; }

}  // namespace

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "scene,system,planner,trials,completed,collision_free_rate,feasible_rate,avg_dist_ground,avg_dist_obstacle\n";
  for (const auto& r : report.rows) {
    os << r.label << ',' << r.system << ',' << to_string(r.planner) << ',' << r.trials << ',' << r.completed << ','
       << fixed(r.collision_free_rate, 4) << ',' << fixed(r.feasible_rate, 4) << ','
       << (r.avg_dist_ground ? fixed(*r.avg_dist_ground) : "") << ','
       << (r.avg_dist_obstacle ? fixed(*r.avg_dist_obstacle) : "") << '\n';
  }
  return os.str();
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"scene", r.label},
                    {"system", r.system},
                    {"planner", to_string(r.planner)},
                    {"trials", r.trials},
                    {"completed", r.completed},
                    {"collision_free_rate", r.collision_free_rate},
                    {"feasible_rate", r.feasible_rate},
                    {"avg_dist_ground", opt_json(r.avg_dist_ground)},
                    {"avg_dist_obstacle", opt_json(r.avg_dist_obstacle)},
                    {"mean_runtime_s", r.mean_runtime}});
  }
  return {{"seed", report.seed},
          {"n_trials", report.n_trials},
          {"collision_check", "per-waypoint"},
          {"rows", std::move(rows)}};
}

std::string trials_to_jsonl(const EvalReport& report) {
  std::string out;
  for (const auto& t : report.trials) {
    const nlohmann::json line = {{"scene", t.label},
                                 {"system", t.system},
                                 {"planner", to_string(t.planner)},
                                 {"trial", t.trial},
                                 {"seed", t.seed},
                                 {"start", point_json(t.start)},
                                 {"goal", point_json(t.goal)},
                                 {"outcome", t.outcome},
                                 {"message", t.message},
                                 {"collision_free", t.collision_free},
                                 {"feasible", t.feasible},
                                 {"collision_violations", t.collision_violations},
                                 {"feasibility_violations", t.feasibility_violations},
                                 {"avg_ground", opt_json(t.avg_ground)},
                                 {"avg_obstacle", opt_json(t.avg_obstacle)},
                                 {"converged", t.converged},
                                 {"iterations", t.iterations},
                                 {"runtime_s", t.runtime}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& prefix) {
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw io_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw io_error("failed while writing '" + path.string() + "'");
  };
  const std::string base = prefix.string();
  write(base + ".csv", report_to_csv(report));
  write(base + ".json", report_to_json(report).dump(2) + "\n");
  write(base + "_trials.jsonl", trials_to_jsonl(report));
}

}  // namespace gpnav
