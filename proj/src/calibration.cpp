#include "geocal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace geocal {

void CalibrationConfig::validate() const {
  if (!(convergence_threshold >= 0.0))
    throw std::invalid_argument("calibration: convergence threshold must be >= 0");
  if (budget < 1) throw std::invalid_argument("calibration: budget must be >= 1");
  if (!(smoothness > 0.0)) throw std::invalid_argument("calibration: smoothness must be > 0");
}

CalibrationConfig calibration_config_from_json(const nlohmann::json& j) {
  CalibrationConfig c;
  if (j.contains("cost")) {
    const auto cost = j["cost"].get<std::string>();
    if (cost == "mse") c.cost = CostKind::mse;
    else if (cost == "wmse") c.cost = CostKind::wmse;
    else throw std::invalid_argument("calibration config: unknown cost '" + cost + "'");
  }
  c.budget = j.value("budget", c.budget);
  c.convergence_threshold = j.value("convergence_threshold", c.convergence_threshold);
  c.max_reweight_iterations = j.value("max_reweight_iterations", c.max_reweight_iterations);
  c.seed = j.value("seed", c.seed);
  c.log10_transform = j.value("log10", c.log10_transform);
  if (j.contains("variogram_family"))
    c.variogram_family = parse_family(j["variogram_family"].get<std::string>());
  c.smoothness = j.value("smoothness", c.smoothness);
  for (const auto& [key, _] : j.items())
    if (key != "cost" && key != "budget" && key != "convergence_threshold" &&
        key != "max_reweight_iterations" && key != "seed" && key != "log10" &&
        key != "variogram_family" && key != "smoothness")
      throw std::invalid_argument("calibration config: unknown key '" + key + "'");
  c.validate();
  return c;
}

nlohmann::json to_json(const CalibrationConfig& c) {
  return {{"cost", c.cost == CostKind::mse ? "mse" : "wmse"},
          {"budget", c.budget},
          {"convergence_threshold", c.convergence_threshold},
          {"max_reweight_iterations", c.max_reweight_iterations},
          {"seed", c.seed},
          {"log10", c.log10_transform},
          {"variogram_family", to_string(c.variogram_family)},
          {"smoothness", c.smoothness}};
}

namespace {

std::vector<double> observed_scale(const ObservationSet& obs, bool log10_transform) {
  std::vector<double> y = obs.values();
  if (log10_transform)
    for (double& v : y) {
      if (!(v > 0.0)) throw InputError("log10 calibration requires positive observations");
      v = std::log10(v);
    }
  return y;
}

}  // namespace

OptimizeOutcome optimize(const ForwardModel& model, const ObservationSet& obs,
                         std::span<const double> weights, std::uint64_t seed, std::size_t budget,
                         bool log10_transform, std::span<const double> warm_start) {
  const Box box = model.bounds();
  box.validate();
  if (!weights.empty() && weights.size() != obs.size())
    throw std::invalid_argument("optimize: weight count does not match observations");
  for (double w : weights)
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("optimize: weights must lie in [0, 1]");

  const auto y = observed_scale(obs, log10_transform);
  const auto& sites = obs.locations();
  auto cost = [&](std::span<const double> theta) {
    const auto pred = log10_transform ? model.predict_log10(theta, sites) : model.predict(theta, sites);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = pred[i] - y[i];
      sum += (weights.empty() ? 1.0 : weights[i]) * r * r;
    }
    const double value = sum / static_cast<double>(y.size());
    return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
  };

  GlobalOptions options;
  options.global.max_evaluations = budget;
  options.global.seed = seed;
  options.global.initial.assign(warm_start.begin(), warm_start.end());
  options.local.max_evaluations = 3000;
  options.local.f_tolerance = 1e-14;
  options.local.x_tolerance = 1e-10;
  options.local.initial_step = 0.02;
  const auto best = minimize_in_box(cost, box, options);
  return {best.x, best.value, best.evaluations, best.converged && std::isfinite(best.value)};
}

std::size_t CalibrationResult::weighting_rounds() const {
  std::size_t rounds = 0;
  for (std::size_t i = 1; i < iterations.size(); ++i)
    if (iterations[i].reoptimized) ++rounds;
  return rounds;
}

std::vector<double> residuals(const ForwardModel& model, const ObservationSet& obs,
                              std::span<const double> theta, bool log10_transform) {
  const auto y = observed_scale(obs, log10_transform);
  auto pred = log10_transform ? model.predict_log10(theta, obs.locations())
                              : model.predict(theta, obs.locations());
  for (std::size_t i = 0; i < y.size(); ++i) pred[i] -= y[i];
  return pred;
}

CalibrationResult calibrate_iterative(const ForwardModel& model, const ObservationSet& obs,
                                      const CalibrationConfig& config) {
  config.validate();
  CalibrationResult result;
  result.parameter_names = model.parameter_names();

  std::vector<double> weights(obs.size(), 1.0);
  auto first = optimize(model, obs, {}, config.seed, config.budget, config.log10_transform);
  result.iterations.push_back({first.theta, weights, std::nullopt, std::nullopt, first.cost, true});
  if (config.cost == CostKind::mse) return result;

  for (std::size_t round = 1; round <= config.max_reweight_iterations; ++round) {
    const auto& previous = result.iterations.back();
    const auto e = residuals(model, obs, previous.theta, config.log10_transform);
    CalibrationIteration it;
    std::vector<double> next(obs.size(), 1.0);
    try {
      const auto empirical = empirical_variogram(obs.with_values(e));
      const auto fitted = fit(empirical, config.variogram_family, config.smoothness);
      it.variogram = fitted.model;
      auto w = compute_weights(obs.locations(), fitted.model);
      next = std::move(w.w);
      for (auto& msg : w.warnings) result.warnings.push_back("round " + std::to_string(round) + ": " + msg);
    } catch (const VariogramFitError& err) {
      result.warnings.push_back("round " + std::to_string(round) +
                                ": variogram fit failed, using equal weights (" + err.what() + ")");
    }

    double dw = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) dw = std::max(dw, std::abs(next[i] - weights[i]));
    it.max_dw = dw;
    it.weights = next;
    weights = std::move(next);

    if (dw < config.convergence_threshold) {
      it.theta = previous.theta;
      it.cost = previous.cost;
      it.reoptimized = false;
      result.iterations.push_back(std::move(it));
      result.converged = true;
      break;
    }
    const auto outcome = optimize(model, obs, weights, config.seed + round, config.budget,
                                  config.log10_transform, previous.theta);
    it.theta = outcome.theta;
    it.cost = outcome.cost;
    result.iterations.push_back(std::move(it));
  }
  return result;
}

nlohmann::json to_json(const CalibrationResult& result) {
  auto iterations = nlohmann::json::array();
  for (const auto& it : result.iterations) {
    nlohmann::json theta = nlohmann::json::object();
    for (std::size_t i = 0; i < it.theta.size(); ++i) theta[result.parameter_names[i]] = it.theta[i];
    iterations.push_back({{"theta", theta},
                          {"weights", it.weights},
                          {"variogram", it.variogram ? to_json(*it.variogram) : nlohmann::json()},
                          {"max_dw", it.max_dw ? nlohmann::json(*it.max_dw) : nlohmann::json()},
                          {"cost", it.cost},
                          {"reoptimized", it.reoptimized}});
  }
  nlohmann::json theta = nlohmann::json::object();
  for (std::size_t i = 0; i < result.theta().size(); ++i)
    theta[result.parameter_names[i]] = result.theta()[i];
  return {{"parameters", result.parameter_names},
          {"theta", theta},
          {"converged", result.converged},
          {"weighting_rounds", result.weighting_rounds()},
          {"iterations", iterations},
          {"warnings", result.warnings}};
}

}  // namespace geocal
