#pragma once

#include "gpnav/error.hpp"
#include "gpnav/freespace.hpp"
#include "gpnav/optimizer.hpp"
#include "gpnav/scene.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gpnav {

enum class PlannerId { kOurs, kAstarOffset, kPrmOffset, kChompSingleGpdf };

const char* to_string(PlannerId id);
PlannerId planner_from_string(const std::string& name);
std::vector<PlannerId> all_planners();

struct Violation {
  int index = 0;
  double value = 0;   // measured distance
  double margin = 0;  // signed distance to the violated bound (negative)
};

struct CheckResult {
  bool ok = true;
  std::vector<Violation> violations;
};

/// Every waypoint keeps d_o(x, y) >= radius. Vacuously true without obstacles.
CheckResult check_collision_free(const Trajectory& traj, const SceneModel& scene, const SystemModel& system);

/// Every waypoint keeps d_g within [(1 - margin) h, (1 + margin) h].
CheckResult check_feasible(const Trajectory& traj, const SceneModel& scene, const SystemModel& system,
                           double margin = 0.10);

struct AvgDistances {
  double ground = 0;
  std::optional<double> obstacle;  // absent without an obstacle field
};

AvgDistances avg_distances(const Trajectory& traj, const SceneModel& scene);

struct Endpoints {
  Point3 start;
  Point3 goal;
};

/// Height above (x, y) at which the ground distance equals the system height.
Point3 lift_endpoint(const SceneModel& scene, const Point2& xy);

/// Rejection-samples two free positions (free leaf, d_o >= radius) at least
/// 4 min_cell apart, lifted to the system height.
Endpoints sample_free_start_goal(const SceneModel& scene, const SystemModel& system, std::mt19937_64& rng);

struct PlannerConfig {
  std::optional<ChompConfig> chomp;  // default_chomp_config(system) when absent
  PrmOptions prm{.n_samples = 300, .k_neighbors = 10, .clearance = 0.0, .cell = 0.0, .seed = 0};  // cell 0: quadtree min_cell
  double feasibility_margin = 0.10;

  ChompConfig chomp_for(const SystemModel& system) const;
};

struct PlanOutcome {
  std::optional<Trajectory> trajectory;
  std::optional<ErrorKind> failure;
  std::string message;
  bool converged = true;
  int iterations = 0;
  double runtime = 0;  // seconds
};

/// Runs one planner. Planning errors are recorded in the outcome.
PlanOutcome run_planner(PlannerId id, const SceneModel& scene, const Point3& start, const Point3& goal,
                        const PlannerConfig& config, std::uint64_t seed = 0);

struct EvalCase {
  std::string label;  // scene variant, e.g. "step" or "flat"
  const SceneModel* scene = nullptr;
  std::vector<PlannerId> planners;
  std::optional<PlannerConfig> config;  // overrides the evaluation-wide config
};

struct TrialRecord {
  std::string label;
  std::string system;
  PlannerId planner = PlannerId::kOurs;
  int trial = 0;
  std::uint64_t seed = 0;
  Point3 start = Point3::Zero();
  Point3 goal = Point3::Zero();
  std::string outcome;  // "ok" or the failure kind
  std::string message;
  bool collision_free = false;
  bool feasible = false;
  int collision_violations = 0;
  int feasibility_violations = 0;
  std::optional<double> avg_ground;
  std::optional<double> avg_obstacle;
  bool converged = false;
  int iterations = 0;
  double runtime = 0;
};

struct EvalRow {
  std::string label;
  std::string system;
  PlannerId planner = PlannerId::kOurs;
  int trials = 0;
  int completed = 0;
  double collision_free_rate = 0;
  double feasible_rate = 0;
  std::optional<double> avg_dist_ground;    // over completed trajectories
  std::optional<double> avg_dist_obstacle;  // over completed trajectories with an obstacle field
  double mean_runtime = 0;
};

struct EvalReport {
  std::uint64_t seed = 0;
  int n_trials = 0;
  std::vector<EvalRow> rows;
  std::vector<TrialRecord> trials;

  const EvalRow* find(const std::string& label, const std::string& system, PlannerId planner) const;
};

/// Seed of trial `index` derived from the master seed.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index);

/// n_trials seeded trials per case; all planners of a case share the trial's
/// endpoints. Deterministic per seed regardless of `workers`.
EvalReport monte_carlo_eval(const std::vector<EvalCase>& cases, int n_trials, std::uint64_t seed,
                            const PlannerConfig& config, int workers = 1);

/// Single-scene convenience overload: one case per system, same label.
EvalReport monte_carlo_eval(const std::vector<const SceneModel*>& scenes, const std::vector<PlannerId>& planners,
                            int n_trials, std::uint64_t seed, const PlannerConfig& config, int workers = 1);

/// One row per case and planner. Runtime is left out so that reruns are
/// byte-identical; it is reported in the JSON form.
std::string report_to_csv(const EvalReport& report);
nlohmann::json report_to_json(const EvalReport& report);
std::string trials_to_jsonl(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& prefix);

}  // namespace gpnav
