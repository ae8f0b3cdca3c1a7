#pragma once

#include "gpnav/geometry.hpp"

#include <Eigen/Core>

#include "json.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gpnav {

/// Squared-exponential kernel hyperparameters.
struct KernelParams {
  double lengthscale = 1.0;      // l > 0
  double signal_variance = 1.0;  // sigma_f^2 > 0
  double noise_variance = 0.0;   // sigma_o^2 >= 0

  void validate() const;
};

/// Query point of dimension 2 or 3, stack allocated.
using QueryVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

struct DistResult {
  double occupancy = 0.0;
  double distance = 0.0;
  QueryVec gradient;
};

struct FitOptions {
  /// Lengthscale override. When absent, l = 2 x mean nearest-neighbour spacing.
  std::optional<double> lengthscale;
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
  /// Distance cap in lengthscales; occupancy below the matching floor is clamped.
  double max_distance_factor = 20.0;
  /// The factor is n x n; scene-sized models drop it after solving for alpha.
  bool keep_factor = true;
};

double se_kernel(std::span<const double> a, std::span<const double> b, const KernelParams& params);

/// Gaussian-process occupancy field over surface points observed with y = 1,
/// read back as an unsigned distance through the SE reverting function.
/// Immutable after construction; safe for concurrent queries.
class GpdfModel {
 public:
  /// `points` is n x dim (one point per row), dim in {2, 3}.
  static GpdfModel fit(const Eigen::Ref<const Eigen::MatrixXd>& points, const KernelParams& params,
                       bool keep_factor = true, double max_distance = 0.0);
  static GpdfModel fit(const Eigen::Ref<const Eigen::MatrixXd>& points, const FitOptions& options);

  /// Rebuilds an inference-only model from stored weights.
  static GpdfModel from_weights(Eigen::MatrixXd train_rows, KernelParams params, Eigen::VectorXd alpha,
                                double max_distance);

  int dim() const { return static_cast<int>(train_.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(train_.cols()); }
  const KernelParams& params() const { return params_; }
  double max_distance() const { return max_distance_; }

  /// Training points, one per column.
  const Eigen::MatrixXd& train() const { return train_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  /// Lower Cholesky factor of K + sigma_o^2 I, when kept.
  const std::optional<Eigen::MatrixXd>& factor() const { return factor_; }

  double occupancy(const QueryVec& q) const;
  double distance(const QueryVec& q) const;
  DistResult query(const QueryVec& q) const;

 private:
  GpdfModel() = default;

  Eigen::MatrixXd train_;  // dim x n
  KernelParams params_;
  Eigen::VectorXd alpha_;
  std::optional<Eigen::MatrixXd> factor_;
  double max_distance_ = 0.0;
};

/// Mean distance from each point to its nearest other point (n >= 2).
double mean_nn_spacing(const Eigen::Ref<const Eigen::MatrixXd>& points);

/// Reverting function for the SE kernel with occupancy clamped to
/// [sigma_f^2 exp(-d_max^2 / 2l^2), sigma_f^2].
double revert(double occupancy, const KernelParams& params, double max_distance);

inline double infer_occupancy(const GpdfModel& m, const QueryVec& q) { return m.occupancy(q); }
inline double infer_distance(const GpdfModel& m, const QueryVec& q) { return m.distance(q); }
inline DistResult infer_distance_gradient(const GpdfModel& m, const QueryVec& q) { return m.query(q); }

/// `queries` is m x dim.
std::vector<DistResult> infer_batch(const GpdfModel& model, const Eigen::Ref<const Eigen::MatrixXd>& queries);

Eigen::MatrixXd to_rows(const Points3& points);
Eigen::MatrixXd to_rows(const Points2& points);

nlohmann::json gpdf_to_json(const GpdfModel& model);
GpdfModel gpdf_from_json(const nlohmann::json& doc);

}  // namespace gpnav
