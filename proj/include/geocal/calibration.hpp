#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "geocal/ci_weights.hpp"
#include "geocal/cost.hpp"
#include "geocal/forward_model.hpp"
#include "geocal/optimize.hpp"
#include "geocal/variogram.hpp"

namespace geocal {

struct CalibrationConfig {
  CostKind cost = CostKind::wmse;
  std::size_t budget = 4000;  // differential-evolution evaluations
  double convergence_threshold = 0.1;
  std::size_t max_reweight_iterations = 10;
  std::uint64_t seed = 0;
  bool log10_transform = false;  // calibrate and fit variograms on log10 values
  VariogramFamily variogram_family = VariogramFamily::matern;
  double smoothness = 1.0;

  void validate() const;
};

CalibrationConfig calibration_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CalibrationConfig& config);

struct OptimizeOutcome {
  std::vector<double> theta;
  double cost = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;
};

/// Bounded global search (differential evolution) plus Nelder-Mead polish of
/// the (weighted) MSE between `observed` and the model's predictions.
/// Empty `weights` means unweighted.
OptimizeOutcome optimize(const ForwardModel& model, const ObservationSet& obs,
                         std::span<const double> weights, std::uint64_t seed,
                         std::size_t budget = 4000, bool log10_transform = false,
                         std::span<const double> warm_start = {});

struct CalibrationIteration {
  std::vector<double> theta;
  std::vector<double> weights;            // weights the theta was (or would be) fitted with
  std::optional<VariogramModel> variogram;  // fitted to the previous iteration's residuals
  std::optional<double> max_dw;           // max |w - w_prev|; absent for the unweighted start
  double cost = 0.0;
  bool reoptimized = true;                // false when the weights had already converged
};

struct CalibrationResult {
  std::vector<std::string> parameter_names;
  std::vector<CalibrationIteration> iterations;
  bool converged = false;
  std::vector<std::string> warnings;

  const std::vector<double>& theta() const { return iterations.back().theta; }
  /// Number of weighted re-optimisations performed.
  std::size_t weighting_rounds() const;
};

/// Residuals (prediction - observation) on the calibration scale.
std::vector<double> residuals(const ForwardModel& model, const ObservationSet& obs,
                              std::span<const double> theta, bool log10_transform);

/// Equal weights, unweighted fit, then repeatedly: fit a variogram to the
/// residuals, compute conditional-information weights, re-optimise the
/// weighted cost; stops once max |w - w_prev| < threshold or at the cap.
CalibrationResult calibrate_iterative(const ForwardModel& model, const ObservationSet& obs,
                                      const CalibrationConfig& config);

nlohmann::json to_json(const CalibrationResult& result);

}  // namespace geocal
