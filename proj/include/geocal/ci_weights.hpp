#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "geocal/spatial.hpp"
#include "geocal/variogram.hpp"

namespace geocal {

class SingularCovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Covariance matrix of n observations under a fitted variogram, with its
/// Cholesky factorization. Entropies are in nats.
class CovarianceContext {
 public:
  CovarianceContext(const VariogramModel& model, const std::vector<Location>& sites);
  /// From an arbitrary SPD matrix; `sill_ratio` is the partial sill / nugget ratio
  /// used by the weight transformation.
  CovarianceContext(Eigen::MatrixXd covariance, double sill_ratio);

  std::size_t size() const { return static_cast<std::size_t>(cov_.rows()); }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::LLT<Eigen::MatrixXd>& factor() const { return llt_; }
  double marginal_variance() const { return cov_(0, 0); }
  double sill_ratio() const { return sill_ratio_; }

  /// log det of the principal submatrix on `subset`.
  double log_det(std::span<const std::size_t> subset) const;
  double log_det() const;

  /// Diagonal of the inverse covariance; 1 / diag is the leave-one-out
  /// simple-kriging variance of every observation.
  Eigen::VectorXd inverse_diagonal() const;

 private:
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double sill_ratio_ = 0.0;
};

/// Differential entropy of a univariate Gaussian with this variance.
double univariate_entropy(double variance);

double joint_entropy(const CovarianceContext& ctx, std::span<const std::size_t> subset);

/// Entropy of `target` conditional on `given`, via the determinant ratio.
double conditional_information(const CovarianceContext& ctx, std::size_t target,
                               std::span<const std::size_t> given);

/// Proportion of the target's variance removed by simple kriging from `given`.
double variance_reduction_f1(const CovarianceContext& ctx, std::size_t target,
                             std::span<const std::size_t> given);

/// Step-2 rescaling factor (m+1)(km+1) / ((k+1) m^2) for k conditioning points.
double f1_scale(double sill_ratio, std::size_t k);

struct WeightVector {
  std::vector<double> w;
  std::vector<double> f1;
  std::vector<double> f1_star;
  std::vector<double> ci;  // nats
  std::vector<std::string> warnings;
};

/// Calibration weights: each observation is conditioned on the other n - 1,
/// w = 1 - f1 * f1_scale(m, n - 1), clamped to [0, 1].
WeightVector compute_weights(const std::vector<Location>& sites, const VariogramModel& model);
inline WeightVector compute_weights(const ObservationSet& residuals, const VariogramModel& model) {
  return compute_weights(residuals.locations(), model);
}

/// Per-point diagnostics `[{ci, f1, f1_star, w}, ...]`.
nlohmann::json diagnostics_json(const WeightVector& weights);

}  // namespace geocal
