#include "geocal/cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "geocal/optimize.hpp"

namespace geocal {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cost: observed and predicted lengths differ (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  if (a.empty()) throw std::invalid_argument("cost: no observations");
}

void check_weights(std::span<const double> w, std::size_t n) {
  if (w.size() != n) throw std::invalid_argument("cost: weight count does not match observations");
  for (double v : w)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("cost: weights must lie in [0, 1]");
}

}  // namespace

CostReport cost_report(std::span<const double> observed, std::span<const double> predicted,
                       std::span<const double> weights) {
  check_lengths(observed, predicted);
  check_weights(weights, observed.size());
  const double n = static_cast<double>(observed.size());
  CostReport report;
  report.weights_used.assign(weights.begin(), weights.end());
  report.per_point_contributions.resize(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double r = predicted[i] - observed[i];
    report.per_point_contributions[i] = weights[i] * r * r / n;
    report.value += report.per_point_contributions[i];
  }
  return report;
}

double mse(std::span<const double> observed, std::span<const double> predicted) {
  check_lengths(observed, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double r = predicted[i] - observed[i];
    sum += r * r;
  }
  return sum / static_cast<double>(observed.size());
}

double wmse(std::span<const double> observed, std::span<const double> predicted,
            std::span<const double> weights) {
  check_lengths(observed, predicted);
  check_weights(weights, observed.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double r = predicted[i] - observed[i];
    sum += weights[i] * r * r;
  }
  return sum / static_cast<double>(observed.size());
}

double mae(std::span<const double> observed, std::span<const double> predicted) {
  check_lengths(observed, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) sum += std::abs(predicted[i] - observed[i]);
  return sum / static_cast<double>(observed.size());
}

double wmae(std::span<const double> observed, std::span<const double> predicted,
            std::span<const double> weights) {
  check_lengths(observed, predicted);
  check_weights(weights, observed.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i)
    sum += weights[i] * std::abs(predicted[i] - observed[i]);
  return sum / static_cast<double>(observed.size());
}

double gaussian_nll(std::span<const double> observed, std::span<const double> predicted,
                    double sigma) {
  check_lengths(observed, predicted);
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian nll: sigma must be positive");
  const double log_norm = std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
  double sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double z = (predicted[i] - observed[i]) / sigma;
    sum += 0.5 * z * z + log_norm;
  }
  return sum;
}

double estimate_mean(const ObservationSet& obs, MeanMode mode,
                     std::optional<std::span<const double>> weights) {
  const auto& y = obs.values();
  std::span<const double> w;
  if (mode == MeanMode::weighted) {
    if (weights) {
      w = *weights;
    } else if (obs.weights()) {
      w = *obs.weights();
    } else {
      throw std::invalid_argument("estimate_mean: weighted mode requires weights");
    }
    check_weights(w, y.size());
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double wi = mode == MeanMode::weighted ? w[i] : 1.0;
    num += wi * y[i];
    den += wi;
  }
  if (!(den > 0.0)) throw std::invalid_argument("estimate_mean: all weights are zero");
  return num / den;
}

double gls_mean(std::span<const double> values, const Eigen::MatrixXd& covariance) {
  const auto n = static_cast<Eigen::Index>(values.size());
  if (covariance.rows() != n || covariance.cols() != n)
    throw std::invalid_argument("gls_mean: covariance does not match data");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw std::runtime_error("gls_mean: singular covariance");
  const Eigen::Map<const Eigen::VectorXd> y(values.data(), n);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd sinv_one = llt.solve(ones);
  return sinv_one.dot(y) / sinv_one.sum();
}

double profile_nll(const ObservationSet& obs, const VariogramModel& model, double* mean_out) {
  const auto n = static_cast<Eigen::Index>(obs.size());
  const Eigen::MatrixXd cov = covariance_matrix(model, obs.locations());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Eigen::Map<const Eigen::VectorXd> y(obs.values().data(), n);
  const Eigen::VectorXd sinv_one = llt.solve(Eigen::VectorXd::Ones(n));
  const double mean = sinv_one.dot(y) / sinv_one.sum();
  if (mean_out) *mean_out = mean;
  const Eigen::VectorXd r = y.array() - mean;
  const Eigen::VectorXd z = llt.matrixL().solve(r);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return 0.5 * (log_det + z.squaredNorm());
}

SpatialMlResult spatial_ml_mean(const ObservationSet& obs, double smoothness,
                                const SpatialMlBounds& bounds) {
  if (obs.size() < 5) throw std::invalid_argument("spatial ML: need at least 5 observations");
  const auto& y = obs.values();
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double variance = 0.0;
  for (double v : y) variance += (v - mean) * (v - mean);
  variance /= (n - 1.0);
  variance = std::max(variance, 10.0 * bounds.variance_lower);

  double diag = bounds.range_upper.value_or(0.0);
  if (!bounds.range_upper) {
    double x0 = obs.locations()[0].x, x1 = x0;
    double y0 = obs.locations()[0].y, y1 = y0;
    for (const auto& s : obs.locations()) {
      x0 = std::min(x0, s.x), x1 = std::max(x1, s.x);
      y0 = std::min(y0, s.y), y1 = std::max(y1, s.y);
    }
    diag = std::hypot(x1 - x0, y1 - y0);
  }
  const double var_hi = bounds.variance_upper.value_or(10.0 * variance);
  if (!(diag > bounds.range_lower) || !(var_hi > bounds.variance_lower))
    throw std::invalid_argument("spatial ML: degenerate search bounds");

  const Box box{{std::log(bounds.variance_lower), std::log(bounds.variance_lower),
                 std::log(bounds.range_lower)},
                {std::log(var_hi), std::log(var_hi), std::log(diag)}};
  VariogramModel model{VariogramFamily::matern, 1.0, 1.0, 1.0, smoothness};
  auto objective = [&](std::span<const double> p) {
    model.nugget = std::exp(p[0]);
    model.partial_sill = std::exp(p[1]);
    model.range = std::exp(p[2]);
    return profile_nll(obs, model);
  };

  NelderMeadOptions nm;
  nm.max_evaluations = 800;
  nm.f_tolerance = 1e-9;
  nm.x_tolerance = 1e-6;
  nm.initial_step = 0.08;
  nm.restarts = 1;
  OptimizeResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& [nugget_share, range_share] :
       {std::pair{0.2, 0.05}, std::pair{0.5, 0.2}}) {
    const std::vector<double> start{std::log(nugget_share * variance),
                                    std::log((1.0 - nugget_share) * variance),
                                    std::log(range_share * diag)};
    auto candidate = nelder_mead(objective, box.clamp(start), box, nm);
    if (candidate.value < best.value) best = std::move(candidate);
  }

  SpatialMlResult out;
  out.model = {VariogramFamily::matern, std::exp(best.x[0]), std::exp(best.x[1]),
               std::exp(best.x[2]), smoothness};
  out.negative_log_likelihood = profile_nll(obs, out.model, &out.mean) +
                                0.5 * n * std::log(2.0 * std::numbers::pi);
  out.converged = best.converged && std::isfinite(best.value);
  return out;
}

}  // namespace geocal
