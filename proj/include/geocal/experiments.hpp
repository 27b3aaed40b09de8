#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "geocal/calibration.hpp"
#include "geocal/gp_sim.hpp"

namespace geocal {

enum class Estimator { unweighted, weighted, spatial_ml };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

struct ExperimentScenario {
  std::string name = "scenario";
  SamplingScheme scheme;
  DependenceLevel dependence = DependenceLevel::mid;
  std::optional<VariogramModel> truth;  // overrides `dependence` when set
  std::size_t replicates = 100;
  std::vector<Estimator> estimators{Estimator::unweighted, Estimator::weighted, Estimator::spatial_ml};
  nlohmann::json forward_model = {{"model", "constant_mean"}};
  double true_mean = 0.0;               // constant_mean truth
  std::vector<double> true_theta;       // other models
  CalibrationConfig calibration;
  std::uint64_t seed = 0;

  bool constant_mean() const;
  VariogramModel residual_truth() const;
  void validate() const;
};

/// Parses a scenario document; relative layout paths resolve against `base_dir`.
ExperimentScenario scenario_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {});
ExperimentScenario load_scenario(const std::filesystem::path& path);

struct Summary {
  double median_bias = 0.0;  // percent of |truth|, or absolute when truth == 0
  double mad = 0.0;          // median absolute deviation about the median, same scale
  bool percentage = true;
};

/// Median bias and median absolute deviation of estimates about a truth.
Summary summarize(std::span<const double> estimates, double truth);

struct ParameterSummary {
  std::string parameter;
  double truth = 0.0;
  Summary summary;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  std::vector<double> estimates;
};

struct EstimatorSummary {
  Estimator estimator;
  std::vector<ParameterSummary> parameters;

  const ParameterSummary& parameter(const std::string& name) const;
};

struct ReplicateRecord {
  std::size_t replicate = 0;
  Estimator estimator = Estimator::unweighted;
  std::string parameter;
  double estimate = 0.0;
};

struct ScenarioResult {
  std::string name;
  std::vector<Location> sites;
  VariogramModel truth;
  std::vector<EstimatorSummary> estimators;
  std::vector<ReplicateRecord> records;
  // Weighted calibration trace per replicate.
  std::vector<std::size_t> weighting_rounds;
  std::vector<bool> converged;
  std::vector<double> first_round_max_dw;  // max |dw| after the first weighting round

  const EstimatorSummary& estimator(Estimator e) const;
};

/// Simulated datasets of a scenario: one per replicate, in replicate order.
std::vector<ObservationSet> simulate_scenario(const ExperimentScenario& scenario,
                                              std::vector<Location>* sites_out = nullptr);

ScenarioResult run_scenario(const ExperimentScenario& scenario);

nlohmann::json to_json(const ScenarioResult& result);
void write_replicate_csv(const std::filesystem::path& path, const ScenarioResult& result);

}  // namespace geocal
