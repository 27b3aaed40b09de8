#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "geocal/spatial.hpp"

namespace geocal {

enum class VariogramFamily { exponential, matern };

std::string to_string(VariogramFamily family);
VariogramFamily parse_family(const std::string& name);

/// Isotropic variogram with nugget.
///
/// gamma(h) = nugget + partial_sill * (1 - rho(h / range)) for h > 0 and
/// gamma(0) = 0, where rho is the exponential or Matern correlation. The
/// smoothness is only used by the Matern family; Matern with smoothness 0.5
/// is the exponential model.
struct VariogramModel {
  VariogramFamily family = VariogramFamily::matern;
  double nugget = 1.0;
  double partial_sill = 0.0;
  double range = 1.0;  // km
  double smoothness = 1.0;

  double total_sill() const { return nugget + partial_sill; }
  /// Partial sill to nugget ratio.
  double sill_ratio() const { return partial_sill / nugget; }
  /// Throws std::invalid_argument when the parameters are out of domain.
  void validate() const;

  friend bool operator==(const VariogramModel&, const VariogramModel&) = default;
};

/// Correlation of the spatially structured component at lag h >= 0 (1 at h = 0).
double correlation(const VariogramModel& model, double h);

double evaluate(const VariogramModel& model, double h);

/// Covariance at lag h: total sill at h = 0, total sill - gamma(h) otherwise.
double to_covariance(const VariogramModel& model, double h);

/// Lag at which the correlation drops to 5%.
double practical_range(const VariogramModel& model);

/// Covariance matrix between observations. Diagonal entries carry the full
/// sill; distinct observations (coincident ones included) share only the
/// partial sill times their correlation.
Eigen::MatrixXd covariance_matrix(const VariogramModel& model, const std::vector<Location>& sites);

struct EmpiricalVariogram {
  std::vector<double> bin_edges;    // n_bins + 1 edges, km
  std::vector<double> bin_centres;  // midpoints of the bins, km
  std::vector<double> mean_lags;    // average pair distance per bin (centre if empty)
  std::vector<double> semivariances;
  std::vector<std::size_t> pair_counts;

  std::size_t occupied_bins() const;
};

/// Matheron estimator over n_bins equal-width bins on (0, max_dist].
EmpiricalVariogram empirical_variogram(const ObservationSet& residuals, std::size_t n_bins,
                                       double max_dist);

/// Default binning: 15 bins up to half the largest pairwise distance.
EmpiricalVariogram empirical_variogram(const ObservationSet& residuals);

/// Merges variograms computed on the same bins, pair-count weighted.
EmpiricalVariogram pool(const std::vector<EmpiricalVariogram>& parts);

class VariogramFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VariogramFit {
  VariogramModel model;
  double objective = 0.0;
  bool converged = true;
  bool degenerate = false;  // partial sill at its lower bound
};

/// Cressie-weighted least squares, sum N_h (gamma_hat - gamma)^2 / gamma^2,
/// over (nugget, partial sill, range) with the smoothness fixed. Bounded
/// Nelder-Mead in log-parameter space, started from `initial`.
VariogramFit fit(const EmpiricalVariogram& empirical, VariogramFamily family,
                 double smoothness, const VariogramModel& initial);

/// Same, with a starting point derived from the empirical variogram.
VariogramFit fit(const EmpiricalVariogram& empirical, VariogramFamily family = VariogramFamily::matern,
                 double smoothness = 1.0);

nlohmann::json to_json(const VariogramModel& model);
VariogramModel variogram_from_json(const nlohmann::json& j);

}  // namespace geocal
