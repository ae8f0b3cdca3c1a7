#include "gpnav/gpdf.hpp"
#include "gpnav/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace gpnav {
namespace {

// Terms whose kernel value is below exp(-kTruncation) of the nearest
// training point's are skipped.
constexpr double kTruncation = 30.0;
// Below this distance the reverting gradient is singular; report zero.
constexpr double kSurfaceDistance = 1e-6;

}  // namespace

void KernelParams::validate() const {
  if (!(lengthscale > 0) || !std::isfinite(lengthscale)) throw validation_error("kernel lengthscale must be > 0");
  if (!(signal_variance > 0) || !std::isfinite(signal_variance))
    throw validation_error("kernel signal variance must be > 0");
  if (!(noise_variance >= 0) || !std::isfinite(noise_variance))
    throw validation_error("kernel noise variance must be >= 0");
}

double se_kernel(std::span<const double> a, std::span<const double> b, const KernelParams& params) {
  double r2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) r2 += (a[i] - b[i]) * (a[i] - b[i]);
  return params.signal_variance * std::exp(-r2 / (2 * params.lengthscale * params.lengthscale));
}

double mean_nn_spacing(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw validation_error("nearest-neighbour spacing needs at least two points");
  const Eigen::MatrixXd cols = points.transpose();
  double total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd d2 = (cols.colwise() - cols.col(i)).colwise().squaredNorm().transpose();
    d2[i] = std::numeric_limits<double>::infinity();
    total += std::sqrt(d2.minCoeff());
  }
  return total / static_cast<double>(n);
}

double revert(double occupancy, const KernelParams& params, double max_distance) {
  const double l2 = params.lengthscale * params.lengthscale;
  const double o_min = params.signal_variance * std::exp(-max_distance * max_distance / (2 * l2));
  const double o = std::clamp(occupancy, o_min, params.signal_variance);
  if (o <= o_min) return max_distance;
  const double d2 = -2 * l2 * std::log(o / params.signal_variance);
  return d2 > 0 ? std::min(std::sqrt(d2), max_distance) : 0.0;
}

GpdfModel GpdfModel::fit(const Eigen::Ref<const Eigen::MatrixXd>& points, const KernelParams& params,
                         bool keep_factor, double max_distance) {
  params.validate();
  const Eigen::Index n = points.rows();
  const Eigen::Index dim = points.cols();
  if (n < 1) throw validation_error("GPDF fit needs at least one training point");
  if (dim != 2 && dim != 3) throw validation_error("GPDF dimension must be 2 or 3");
  if (!points.allFinite()) throw validation_error("GPDF training points must be finite");

  GpdfModel m;
  m.params_ = params;
  m.train_ = points.transpose();
  m.max_distance_ = max_distance > 0 ? max_distance : 20.0 * params.lengthscale;

  const double inv2l2 = 1.0 / (2 * params.lengthscale * params.lengthscale);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = params.signal_variance + params.noise_variance;
    for (Eigen::Index i = j + 1; i < n; ++i)
      k(i, j) = params.signal_variance * std::exp(-(m.train_.col(i) - m.train_.col(j)).squaredNorm() * inv2l2);
  }

  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(k);
  if (llt.info() != Eigen::Success) {
    // Locate the failing pivot with an unblocked pass; `k` is still the input.
    Eigen::Index bad = n - 1;
    double pivot = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      double djj = params.signal_variance + params.noise_variance - k.row(j).head(j).squaredNorm();
      if (!(djj > 0)) {
        bad = j;
        pivot = djj;
        break;
      }
      djj = std::sqrt(djj);
      k(j, j) = djj;
      for (Eigen::Index i = j + 1; i < n; ++i)
        k(i, j) = (k(i, j) - k.row(i).head(j).dot(k.row(j).head(j))) / djj;
    }
    throw Error(ErrorKind::kFactorization,
                "GPDF covariance is not positive definite: pivot " + std::to_string(bad) + " of " +
                    std::to_string(n) + " is " + std::to_string(pivot) +
                    " (duplicate training points need noise variance > 0)");
  }
  {
    // Eigen accepts tiny positive pivots; treat them as singular too.
    const Eigen::VectorXd pivots = llt.matrixLLT().diagonal().array().square();
    Eigen::Index j = 0;
    if (pivots.minCoeff(&j) < 1e-12 * params.signal_variance)
      throw Error(ErrorKind::kFactorization, "GPDF covariance is numerically singular at pivot " +
                                                 std::to_string(j) + " of " + std::to_string(n) +
                                                 " (duplicate training points need noise variance > 0)");
  }
  m.alpha_ = llt.solve(Eigen::VectorXd::Ones(n));
  if (keep_factor) m.factor_ = Eigen::MatrixXd(llt.matrixL());
  return m;
}

GpdfModel GpdfModel::fit(const Eigen::Ref<const Eigen::MatrixXd>& points, const FitOptions& options) {
  KernelParams params;
  params.signal_variance = options.signal_variance;
  params.noise_variance = options.noise_variance;
  if (options.lengthscale) {
    params.lengthscale = *options.lengthscale;
  } else {
    if (points.rows() < 2) throw validation_error("GPDF with a single point needs an explicit lengthscale");
    params.lengthscale = 2.0 * mean_nn_spacing(points);
  }
  return fit(points, params, options.keep_factor, options.max_distance_factor * params.lengthscale);
}

GpdfModel GpdfModel::from_weights(Eigen::MatrixXd train_rows, KernelParams params, Eigen::VectorXd alpha,
                                  double max_distance) {
  params.validate();
  if (train_rows.rows() != alpha.size()) throw validation_error("GPDF weights do not match training points");
  if (train_rows.cols() != 2 && train_rows.cols() != 3) throw validation_error("GPDF dimension must be 2 or 3");
  GpdfModel m;
  m.train_ = train_rows.transpose();
  m.params_ = params;
  m.alpha_ = std::move(alpha);
  m.max_distance_ = max_distance > 0 ? max_distance : 20.0 * params.lengthscale;
  return m;
}

double GpdfModel::occupancy(const QueryVec& q) const {
  const double inv2l2 = 1.0 / (2 * params_.lengthscale * params_.lengthscale);
  const Eigen::VectorXd d2 = (train_.colwise() - q).colwise().squaredNorm().transpose();
  return params_.signal_variance * ((-d2.array() * inv2l2).exp() * alpha_.array()).sum();
}

// Occupancy is accumulated relative to the nearest training point so that
// queries many lengthscales away do not underflow:
//   o = sigma_f^2 exp(-m / 2l^2) S,  S = sum_i alpha_i exp(-(d_i^2 - m) / 2l^2)
//   d^2 = -2 l^2 log(o / sigma_f^2) = m - 2 l^2 log S
//   grad d = (1 / d) sum_i alpha_i e_i (q - x_i) / S
DistResult GpdfModel::query(const QueryVec& q) const {
  const double l2 = params_.lengthscale * params_.lengthscale;
  const double inv2l2 = 1.0 / (2 * l2);
  const Eigen::Index n = train_.cols();
  const int dim = this->dim();

  DistResult out;
  out.gradient = QueryVec::Zero(dim);

  thread_local Eigen::VectorXd d2;
  d2.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0;
    for (int k = 0; k < dim; ++k) {
      const double diff = q[k] - train_(k, i);
      s += diff * diff;
    }
    d2[i] = s;
  }
  const double m = d2.minCoeff();
  const double cutoff = m + kTruncation / inv2l2;

  double sum = 0;
  QueryVec weighted = QueryVec::Zero(dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d2[i] > cutoff) continue;
    const double w = alpha_[i] * std::exp(-(d2[i] - m) * inv2l2);
    sum += w;
    for (int k = 0; k < dim; ++k) weighted[k] += w * (q[k] - train_(k, i));
  }

  const double log_ratio = -m * inv2l2 + (sum > 0 ? std::log(sum) : 0.0);  // log(o / sigma_f^2)
  out.occupancy = sum > 0 ? params_.signal_variance * std::exp(log_ratio) : 0.0;

  const double d_max = max_distance_;
  const double log_floor = -d_max * d_max * inv2l2;
  if (!(sum > 0) || log_ratio <= log_floor) {
    out.distance = d_max;  // clamped: o <= o_min
    return out;
  }
  if (log_ratio >= 0) {
    out.distance = 0.0;  // clamped: o >= sigma_f^2
    return out;
  }
  const double dist2 = -2 * l2 * log_ratio;
  out.distance = std::sqrt(dist2);
  if (out.distance >= kSurfaceDistance) out.gradient = weighted / (sum * out.distance);
  return out;
}

double GpdfModel::distance(const QueryVec& q) const { return query(q).distance; }

std::vector<DistResult> infer_batch(const GpdfModel& model, const Eigen::Ref<const Eigen::MatrixXd>& queries) {
  if (queries.rows() > 0 && queries.cols() != model.dim())
    throw validation_error("query dimension does not match the GPDF");
  std::vector<DistResult> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) out.push_back(model.query(queries.row(i).transpose()));
  return out;
}

Eigen::MatrixXd to_rows(const Points3& points) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return out;
}

Eigen::MatrixXd to_rows(const Points2& points) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(points.size()), 2);
  for (std::size_t i = 0; i < points.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return out;
}

nlohmann::json gpdf_to_json(const GpdfModel& model) {
  nlohmann::json doc;
  doc["dim"] = model.dim();
  doc["lengthscale"] = model.params().lengthscale;
  doc["signal_variance"] = model.params().signal_variance;
  doc["noise_variance"] = model.params().noise_variance;
  doc["max_distance"] = model.max_distance();
  auto& pts = doc["points"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.train().cols(); ++i) {
    auto row = nlohmann::json::array();
    for (int k = 0; k < model.dim(); ++k) row.push_back(model.train()(k, i));
    pts.push_back(std::move(row));
  }
  doc["alpha"] = std::vector<double>(model.alpha().data(), model.alpha().data() + model.alpha().size());
  return doc;
}

GpdfModel gpdf_from_json(const nlohmann::json& doc) {
  try {
    const int dim = doc.at("dim").get<int>();
    KernelParams params;
    params.lengthscale = doc.at("lengthscale").get<double>();
    params.signal_variance = doc.at("signal_variance").get<double>();
    params.noise_variance = doc.at("noise_variance").get<double>();
    const auto& pts = doc.at("points");
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(pts.size()), dim);
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (int k = 0; k < dim; ++k) rows(static_cast<Eigen::Index>(i), k) = pts[i].at(k).get<double>();
    const auto alpha_vec = doc.at("alpha").get<std::vector<double>>();
    Eigen::VectorXd alpha = Eigen::Map<const Eigen::VectorXd>(alpha_vec.data(), static_cast<Eigen::Index>(alpha_vec.size()));
    return GpdfModel::from_weights(std::move(rows), params, std::move(alpha), doc.at("max_distance").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("malformed GPDF record: ") + e.what());
  }
}

}  // namespace gpnav
