#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "geocal/gp_sim.hpp"
#include "geocal/spatial.hpp"
#include "geocal/variogram.hpp"

namespace geocal {

enum class CostKind { mse, wmse };

struct CostReport {
  double value = 0.0;
  std::vector<double> per_point_contributions;
  std::vector<double> weights_used;
};

/// (1/n) sum w_i (yhat_i - y_i)^2, with contributions w_i (yhat_i - y_i)^2 / n.
CostReport cost_report(std::span<const double> observed, std::span<const double> predicted,
                       std::span<const double> weights);

double mse(std::span<const double> observed, std::span<const double> predicted);
double wmse(std::span<const double> observed, std::span<const double> predicted,
            std::span<const double> weights);

// Absolute-error counterparts; not used by the calibration engine.
double mae(std::span<const double> observed, std::span<const double> predicted);
double wmae(std::span<const double> observed, std::span<const double> predicted,
            std::span<const double> weights);

/// Negative log-likelihood of independent N(predicted_i, sigma^2) observations.
double gaussian_nll(std::span<const double> observed, std::span<const double> predicted,
                    double sigma);

enum class MeanMode { unweighted, weighted };

/// Constant that minimises (W)MSE: sum w_i y_i / sum w_i. Weighted mode takes
/// `weights` if given, else the observation set's own weights.
double estimate_mean(const ObservationSet& obs, MeanMode mode,
                     std::optional<std::span<const double>> weights = std::nullopt);

/// Generalised least squares mean (1' S^-1 y) / (1' S^-1 1).
double gls_mean(std::span<const double> values, const Eigen::MatrixXd& covariance);

struct SpatialMlBounds {
  double variance_lower = 1e-6;
  std::optional<double> variance_upper;  // default 10 x sample variance
  double range_lower = 0.1;
  std::optional<double> range_upper;     // default: diagonal of the sites' bounding box
};

struct SpatialMlResult {
  double mean = 0.0;
  VariogramModel model;
  double negative_log_likelihood = 0.0;
  bool converged = true;
};

/// Maximum likelihood for (mean, nugget, partial sill, range) under a Matern
/// covariance with fixed smoothness. The mean is profiled out by GLS.
SpatialMlResult spatial_ml_mean(const ObservationSet& obs, double smoothness = 1.0,
                                const SpatialMlBounds& bounds = {});

/// Profile negative log-likelihood (constant term dropped) at given covariance
/// parameters; also returns the GLS mean.
double profile_nll(const ObservationSet& obs, const VariogramModel& model, double* mean_out = nullptr);

}  // namespace geocal
