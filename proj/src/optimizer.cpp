#include "gpnav/optimizer.hpp"
#include "gpnav/error.hpp"
#include "gpnav/gpdf.hpp"
#include "gpnav/scene.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace gpnav {

void Trajectory::validate() const {
  if (waypoints.rows() < 3) throw validation_error("trajectory needs at least 3 waypoints");
  if (!waypoints.allFinite()) throw validation_error("trajectory has non-finite coordinates");
  if (!(dt > 0) || !std::isfinite(dt)) throw validation_error("trajectory dt must be finite and > 0");
}

void ChompConfig::validate() const {
  if (q < 3) throw validation_error("Q must be >= 3");
  if (!(dt > 0)) throw validation_error("dt must be > 0");
  if (!(lambda_s >= 0) || !(lambda_o >= 0) || !(lambda_g >= 0)) throw validation_error("cost weights must be >= 0");
  if (!(epsilon > 0)) throw validation_error("epsilon must be > 0");
  if (!(eta > 0)) throw validation_error("eta must be > 0");
  if (max_iters < 0) throw validation_error("max_iters must be >= 0");
  if (!(grad_tol > 0)) throw validation_error("grad_tol must be > 0");
  if (!(backtrack > 0 && backtrack < 1)) throw validation_error("backtracking factor must be in (0, 1)");
  if (max_halvings < 0) throw validation_error("max_halvings must be >= 0");
}

namespace {

// Largest eigenvalue of the inverse metric: 1 / (2 - 2 cos(pi / (Q - 1))).
double inverse_metric_norm(int q) { return 1.0 / (2.0 - 2.0 * std::cos(std::numbers::pi / (q - 1))); }

}  // namespace

ChompConfig default_chomp_config(double height, double radius, int q) {
  if (!(height > 0) || !(radius > 0)) throw validation_error("system height and radius must be > 0");
  if (q < 3) throw validation_error("Q must be >= 3");
  ChompConfig c;
  c.q = q;
  c.epsilon = radius + 0.1;
  // Curvature of the ground term along the smoothest trajectory mode. The
  // base step is ten times the stable one and backtracking trims it.
  const double stiffness = inverse_metric_norm(c.q) * (c.lambda_g / height + c.lambda_s);
  c.eta = 0.1 * stiffness;
  c.grad_tol = 3e-4 * stiffness;
  return c;
}

CostFields scene_cost_fields(const SceneModel& scene) {
  return {scene.obstacle_field.get(), scene.ground_field.get(), scene.system.height};
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kGradientTolerance: return "gradient_tolerance";
    case StopReason::kStalled: return "stalled";
    case StopReason::kMaxIterations: return "max_iterations";
  }
  return "unknown";
}

Trajectory resample_waypoints(const Points3& path, int q, double dt) {
  if (q < 3) throw validation_error("Q must be >= 3");
  if (path.size() < 2) throw validation_error("path needs at least 2 points");
  std::vector<double> cum(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) cum[i] = cum[i - 1] + (path[i] - path[i - 1]).norm();
  const double total = cum.back();
  if (!(total > 0) || !std::isfinite(total)) throw validation_error("cannot resample a path of zero length");

  Trajectory traj;
  traj.dt = dt;
  traj.waypoints.resize(q, 3);
  traj.waypoints.row(0) = path.front().transpose();
  traj.waypoints.row(q - 1) = path.back().transpose();
  std::size_t seg = 1;
  for (int k = 1; k < q - 1; ++k) {
    const double s = total * k / (q - 1);
    while (seg + 1 < path.size() && cum[seg] < s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double t = len > 0 ? (s - cum[seg - 1]) / len : 0.0;
    traj.waypoints.row(k) = ((1.0 - t) * path[seg - 1] + t * path[seg]).transpose();
  }
  return traj;
}

double obstacle_cost(double d, double epsilon) {
  if (d > epsilon) return 0.0;
  const double e = d - epsilon;
  return e * e / (2.0 * epsilon);
}

double obstacle_cost_derivative(double d, double epsilon) { return d > epsilon ? 0.0 : (d - epsilon) / epsilon; }

double ground_cost(double d, double height) {
  const double e = d - height;
  return e * e / (2.0 * height);
}

double ground_cost_derivative(double d, double height) { return (d - height) / height; }

double smoothness_cost(const Trajectory& traj) {
  const auto& x = traj.waypoints;
  const Eigen::Index q = x.rows();
  if (q < 2) return 0.0;
  const double inv_dt = 1.0 / traj.dt;
  return 0.5 * ((x.bottomRows(q - 1) - x.topRows(q - 1)) * inv_dt).squaredNorm();
}

namespace {

struct FieldSample {
  double distance;
  Eigen::Vector3d gradient;
};

FieldSample sample(const GpdfModel& field, const Eigen::RowVector3d& p) {
  QueryVec q(field.dim());
  q = p.head(field.dim()).transpose();
  const DistResult r = field.query(q);
  FieldSample s{r.distance, Eigen::Vector3d::Zero()};
  s.gradient.head(field.dim()) = r.gradient;
  return s;
}

// Total cost; when `grad` is given it receives the full gradient with the
// endpoint rows zeroed.
double evaluate(const Eigen::MatrixX3d& x, double dt, const CostFields& fields, const ChompConfig& c,
                Eigen::MatrixX3d* grad) {
  const Eigen::Index q = x.rows();
  const double inv_dt = 1.0 / dt;
  const Eigen::MatrixX3d v = (x.bottomRows(q - 1) - x.topRows(q - 1)) * inv_dt;
  Eigen::VectorXd speed = v.rowwise().norm();

  double cost = c.lambda_s * 0.5 * v.squaredNorm();
  if (grad) {
    grad->setZero(q, 3);
    // d/dx of 0.5 |v_j|^2: -v_j / dt at x_j, +v_j / dt at x_{j+1}.
    grad->topRows(q - 1) -= c.lambda_s * inv_dt * v;
    grad->bottomRows(q - 1) += c.lambda_s * inv_dt * v;
  }

  for (Eigen::Index i = 0; i < q; ++i) {
    const Eigen::Index seg = std::min<Eigen::Index>(i, q - 2);
    if (fields.obstacle && c.lambda_o > 0) {
      const FieldSample s = sample(*fields.obstacle, x.row(i));
      const double co = obstacle_cost(s.distance, c.epsilon);
      cost += c.lambda_o * co * speed(seg);
      if (grad && s.distance <= c.epsilon) {
        grad->row(i) += c.lambda_o * obstacle_cost_derivative(s.distance, c.epsilon) * speed(seg) *
                        s.gradient.transpose();
        if (speed(seg) > 0) {
          const Eigen::RowVector3d u = v.row(seg) / speed(seg) * inv_dt;
          grad->row(seg + 1) += c.lambda_o * co * u;
          grad->row(seg) -= c.lambda_o * co * u;
        }
      }
    }
    if (fields.ground && c.lambda_g > 0) {
      const FieldSample s = sample(*fields.ground, x.row(i));
      cost += c.lambda_g * ground_cost(s.distance, fields.height);
      if (grad) grad->row(i) += c.lambda_g * ground_cost_derivative(s.distance, fields.height) * s.gradient.transpose();
    }
  }
  if (grad) {
    grad->row(0).setZero();
    grad->row(q - 1).setZero();
  }
  return cost;
}

void check_fields(const CostFields& fields) {
  if (fields.ground && fields.ground->dim() != 3) throw validation_error("ground field must be 3D");
  if (fields.ground && !(fields.height > 0)) throw validation_error("target ground distance must be > 0");
}

}  // namespace

double total_cost(const Trajectory& traj, const CostFields& fields, const ChompConfig& config) {
  traj.validate();
  check_fields(fields);
  return evaluate(traj.waypoints, traj.dt, fields, config, nullptr);
}

Eigen::MatrixX3d cost_gradient(const Trajectory& traj, const CostFields& fields, const ChompConfig& config) {
  traj.validate();
  check_fields(fields);
  Eigen::MatrixX3d g;
  evaluate(traj.waypoints, traj.dt, fields, config, &g);
  return g;
}

Eigen::MatrixXd smoothness_metric(int q) {
  if (q < 3) throw validation_error("Q must be >= 3");
  const int n = q - 2;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = 2.0;
    if (i + 1 < n) a(i, i + 1) = a(i + 1, i) = -1.0;
  }
  return a;
}

Eigen::MatrixXd apply_inverse_metric(const Eigen::MatrixXd& rhs) {
  // Thomas algorithm for the constant (-1, 2, -1) system.
  const Eigen::Index n = rhs.rows();
  Eigen::MatrixXd x = rhs;
  if (n == 0) return x;
  std::vector<double> c(static_cast<std::size_t>(n));
  double b = 2.0;
  c[0] = -1.0 / b;
  x.row(0) /= b;
  for (Eigen::Index i = 1; i < n; ++i) {
    b = 2.0 + c[i - 1];
    c[i] = -1.0 / b;
    x.row(i) = (x.row(i) + x.row(i - 1)) / b;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) x.row(i) -= c[i] * x.row(i + 1);
  return x;
}

OptimResult optimize(const Trajectory& initial, const CostFields& fields, const ChompConfig& config) {
  initial.validate();
  config.validate();
  check_fields(fields);

  const Eigen::Index q = initial.waypoints.rows();
  Eigen::MatrixX3d x = initial.waypoints;
  Eigen::MatrixX3d grad, trial_grad;

  auto require_finite = [](double cost, const Eigen::MatrixX3d& g, int it) {
    if (!std::isfinite(cost) || !g.allFinite()) {
      std::ostringstream msg;
      msg << "optimizer produced a non-finite " << (std::isfinite(cost) ? "gradient" : "cost") << " at iteration "
          << it;
      throw Error(ErrorKind::kNonConvergence, msg.str());
    }
  };

  OptimResult result;
  double cost = evaluate(x, initial.dt, fields, config, &grad);
  require_finite(cost, grad, 0);
  result.cost_history.push_back(cost);

  int it = 0;
  for (; it < config.max_iters; ++it) {
    const Eigen::MatrixXd step = apply_inverse_metric(grad.middleRows(1, q - 2));
    if (step.lpNorm<Eigen::Infinity>() < config.grad_tol) {
      result.converged = true;
      result.reason = StopReason::kGradientTolerance;
      break;
    }
    double scale = 1.0 / config.eta;
    bool accepted = false;
    Eigen::MatrixX3d trial;
    double trial_cost = 0;
    for (int h = 0; h <= config.max_halvings; ++h, scale *= config.backtrack) {
      trial = x;
      trial.middleRows(1, q - 2) -= scale * step;
      trial_cost = evaluate(trial, initial.dt, fields, config, &trial_grad);
      require_finite(trial_cost, trial_grad, it + 1);
      if (trial_cost < cost) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.converged = true;
      result.reason = StopReason::kStalled;
      break;
    }
    x.swap(trial);
    grad.swap(trial_grad);
    cost = trial_cost;
    result.cost_history.push_back(cost);
  }
  if (it == config.max_iters && !result.converged) result.reason = StopReason::kMaxIterations;

  result.iterations = it;
  result.trajectory.waypoints = std::move(x);
  result.trajectory.dt = initial.dt;
  return result;
}

WaypointDiagnostics diagnose(const Trajectory& traj, const SceneModel& scene) {
  WaypointDiagnostics diag;
  for (int i = 0; i < traj.size(); ++i) {
    const Point3 p = traj.at(i);
    diag.obstacle_distance.push_back(scene.obstacle_distance(p));
    diag.ground_distance.push_back(scene.ground_distance(p));
  }
  return diag;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write trajectory '" + path.string() + "'");
  out.precision(9);
  out << "t,x,y,z\n";
  for (int i = 0; i < traj.size(); ++i)
    out << i * traj.dt << ',' << traj.waypoints(i, 0) << ',' << traj.waypoints(i, 1) << ',' << traj.waypoints(i, 2)
        << '\n';
  if (!out) throw io_error("failed while writing trajectory '" + path.string() + "'");
}

nlohmann::json trajectory_to_json(const Trajectory& traj, const WaypointDiagnostics& diag) {
  using nlohmann::json;
  json rows = json::array();
  for (int i = 0; i < traj.size(); ++i) {
    json row = {{"t", i * traj.dt},
                {"x", traj.waypoints(i, 0)},
                {"y", traj.waypoints(i, 1)},
                {"z", traj.waypoints(i, 2)}};
    const double d_o = i < static_cast<int>(diag.obstacle_distance.size()) ? diag.obstacle_distance[i]
                                                                           : std::numeric_limits<double>::quiet_NaN();
    row["d_o"] = std::isfinite(d_o) ? json(d_o) : json(nullptr);
    row["d_g"] = i < static_cast<int>(diag.ground_distance.size()) ? json(diag.ground_distance[i]) : json(nullptr);
    rows.push_back(std::move(row));
  }
  return {{"dt", traj.dt}, {"waypoints", std::move(rows)}};
}

void write_trajectory_json(const Trajectory& traj, const WaypointDiagnostics& diag, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write trajectory '" + path.string() + "'");
  out << trajectory_to_json(traj, diag).dump(2) << '\n';
  if (!out) throw io_error("failed while writing trajectory '" + path.string() + "'");
}

}  // namespace gpnav
