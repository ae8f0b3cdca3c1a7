#pragma once

#include "gpnav/geometry.hpp"

#include <Eigen/Core>

#include "json.hpp"

#include <filesystem>
#include <vector>

namespace gpnav {

class GpdfModel;
struct SceneModel;

struct Trajectory {
  Eigen::MatrixX3d waypoints;  // Q x 3
  double dt = 1.0;

  int size() const { return static_cast<int>(waypoints.rows()); }
  Point3 at(int i) const { return waypoints.row(i).transpose(); }
  void validate() const;
};

struct ChompConfig {
  int q = 50;
  double dt = 1.0;
  double lambda_s = 0.005;
  double lambda_o = 1.0;
  double lambda_g = 1.0;
  double epsilon = 0.35;
  double eta = 100.0;
  int max_iters = 500;
  double grad_tol = 1e-4;
  double backtrack = 0.5;
  int max_halvings = 20;

  void validate() const;
};

/// Defaults tuned for a system: epsilon = radius + 0.1 and a step scale
/// matched to the stiffness of the ground term.
ChompConfig default_chomp_config(double height, double radius, int q = 50);

/// Fields that the cost terms read. The obstacle field may be 2D (queried at
/// x, y) or 3D; either field may be null, which disables its term.
struct CostFields {
  const GpdfModel* obstacle = nullptr;
  const GpdfModel* ground = nullptr;
  double height = 0;  // target ground distance
};

/// Obstacle field plus ground field of the dual-field scene.
CostFields scene_cost_fields(const SceneModel& scene);

enum class StopReason { kGradientTolerance, kStalled, kMaxIterations };
const char* to_string(StopReason reason);

struct OptimResult {
  Trajectory trajectory;
  std::vector<double> cost_history;  // entry 0 is the initial cost
  bool converged = false;
  int iterations = 0;
  StopReason reason = StopReason::kMaxIterations;
};

/// Q points equally spaced by arc length along the polyline.
Trajectory resample_waypoints(const Points3& path, int q, double dt = 1.0);

double obstacle_cost(double d, double epsilon);
double obstacle_cost_derivative(double d, double epsilon);
double ground_cost(double d, double height);
double ground_cost_derivative(double d, double height);

/// Sum over segments of 0.5 |(x_{i+1} - x_i) / dt|^2.
double smoothness_cost(const Trajectory& traj);

/// lambda_s * smoothness + sum over all waypoints of
/// lambda_o c_o(d_o) |v| + lambda_g c_g(d_g). Waypoint i uses the velocity of
/// segment i; the last waypoint uses the last segment.
double total_cost(const Trajectory& traj, const CostFields& fields, const ChompConfig& config);

/// Exact gradient of total_cost with the endpoint rows zeroed.
Eigen::MatrixX3d cost_gradient(const Trajectory& traj, const CostFields& fields, const ChompConfig& config);

/// Tridiagonal (-1, 2, -1) metric over the Q-2 interior waypoints.
Eigen::MatrixXd smoothness_metric(int q);

/// Solves smoothness_metric(rhs.rows() + 2) * x = rhs column by column.
Eigen::MatrixXd apply_inverse_metric(const Eigen::MatrixXd& rhs);

OptimResult optimize(const Trajectory& initial, const CostFields& fields, const ChompConfig& config);

struct WaypointDiagnostics {
  std::vector<double> obstacle_distance;  // +inf when the field is absent
  std::vector<double> ground_distance;
};

WaypointDiagnostics diagnose(const Trajectory& traj, const SceneModel& scene);

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
nlohmann::json trajectory_to_json(const Trajectory& traj, const WaypointDiagnostics& diag);
void write_trajectory_json(const Trajectory& traj, const WaypointDiagnostics& diag, const std::filesystem::path& path);

}  // namespace gpnav
