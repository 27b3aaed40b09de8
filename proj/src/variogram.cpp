#include "geocal/variogram.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "geocal/optimize.hpp"

namespace geocal {

std::string to_string(VariogramFamily family) {
  return family == VariogramFamily::exponential ? "exponential" : "matern";
}

VariogramFamily parse_family(const std::string& name) {
  if (name == "exponential") return VariogramFamily::exponential;
  if (name == "matern") return VariogramFamily::matern;
  throw std::invalid_argument("unknown variogram family '" + name + "'");
}

void VariogramModel::validate() const {
  if (!(nugget > 0.0)) throw std::invalid_argument("variogram: nugget must be positive");
  if (!(partial_sill >= 0.0)) throw std::invalid_argument("variogram: partial sill must be >= 0");
  if (!(range > 0.0)) throw std::invalid_argument("variogram: range must be positive");
  if (!(smoothness > 0.0)) throw std::invalid_argument("variogram: smoothness must be positive");
  if (!std::isfinite(nugget) || !std::isfinite(partial_sill) || !std::isfinite(range) ||
      !std::isfinite(smoothness))
    throw std::invalid_argument("variogram: parameters must be finite");
}

double correlation(const VariogramModel& model, double h) {
  if (h < 0.0) throw std::invalid_argument("variogram: negative lag");
  const double x = h / model.range;
  if (model.family == VariogramFamily::exponential) return std::exp(-x);
  if (x < 1e-12) return 1.0;
  if (x > 700.0) return 0.0;
  const double kappa = model.smoothness;
  const double norm = std::exp((1.0 - kappa) * std::log(2.0) - std::lgamma(kappa));
  return std::min(1.0, norm * std::pow(x, kappa) * std::cyl_bessel_k(kappa, x));
}

double evaluate(const VariogramModel& model, double h) {
  if (h < 0.0) throw std::invalid_argument("variogram: negative lag");
  if (h == 0.0) return 0.0;
  return model.nugget + model.partial_sill * (1.0 - correlation(model, h));
}

double to_covariance(const VariogramModel& model, double h) {
  if (h < 0.0) throw std::invalid_argument("variogram: negative lag");
  if (h == 0.0) return model.total_sill();
  return model.partial_sill * correlation(model, h);
}

double practical_range(const VariogramModel& model) {
  double lo = 0.0, hi = model.range;
  while (correlation(model, hi) > 0.05) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (correlation(model, mid) > 0.05 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::MatrixXd covariance_matrix(const VariogramModel& model, const std::vector<Location>& sites) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cov(i, i) = model.total_sill();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double h = distance(sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]);
      cov(i, j) = cov(j, i) = model.partial_sill * correlation(model, h);
    }
  }
  return cov;
}

std::size_t EmpiricalVariogram::occupied_bins() const {
  return static_cast<std::size_t>(
      std::count_if(pair_counts.begin(), pair_counts.end(), [](auto c) { return c > 0; }));
}

EmpiricalVariogram empirical_variogram(const ObservationSet& residuals, std::size_t n_bins,
                                       double max_dist) {
  if (n_bins < 1) throw std::invalid_argument("empirical variogram: need at least one bin");
  if (residuals.size() < 2)
    throw std::invalid_argument("empirical variogram: need at least two observations");
  if (!(max_dist > 0.0)) throw std::invalid_argument("empirical variogram: max_dist must be > 0");

  EmpiricalVariogram ev;
  const double width = max_dist / static_cast<double>(n_bins);
  ev.bin_edges.resize(n_bins + 1);
  for (std::size_t b = 0; b <= n_bins; ++b) ev.bin_edges[b] = width * static_cast<double>(b);
  ev.bin_edges.back() = max_dist;
  ev.bin_centres.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b)
    ev.bin_centres[b] = 0.5 * (ev.bin_edges[b] + ev.bin_edges[b + 1]);

  std::vector<double> sum_sq(n_bins, 0.0), sum_lag(n_bins, 0.0);
  ev.pair_counts.assign(n_bins, 0);
  const auto& sites = residuals.locations();
  const auto& e = residuals.values();
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      const double h = distance(sites[i], sites[j]);
      if (h > max_dist) continue;
      const auto b = std::min(n_bins - 1, static_cast<std::size_t>(h / width));
      const double d = e[i] - e[j];
      sum_sq[b] += d * d;
      sum_lag[b] += h;
      ++ev.pair_counts[b];
    }
  }
  ev.semivariances.resize(n_bins);
  ev.mean_lags.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    const auto count = static_cast<double>(ev.pair_counts[b]);
    ev.semivariances[b] = count > 0 ? sum_sq[b] / (2.0 * count) : 0.0;
    ev.mean_lags[b] = count > 0 ? sum_lag[b] / count : ev.bin_centres[b];
  }
  return ev;
}

EmpiricalVariogram empirical_variogram(const ObservationSet& residuals) {
  const auto d = pairwise_distances(residuals);
  const double max_dist = 0.5 * d.maxCoeff();
  if (!(max_dist > 0.0))
    throw std::invalid_argument("empirical variogram: all observations share one site");
  return empirical_variogram(residuals, 15, max_dist);
}

EmpiricalVariogram pool(const std::vector<EmpiricalVariogram>& parts) {
  if (parts.empty()) throw std::invalid_argument("pool: no variograms");
  EmpiricalVariogram out = parts.front();
  const std::size_t n = out.semivariances.size();
  std::vector<double> sum_gamma(n, 0.0), sum_lag(n, 0.0);
  std::fill(out.pair_counts.begin(), out.pair_counts.end(), 0);
  for (const auto& p : parts) {
    if (p.bin_edges != out.bin_edges) throw std::invalid_argument("pool: bins differ");
    for (std::size_t b = 0; b < n; ++b) {
      const auto c = static_cast<double>(p.pair_counts[b]);
      sum_gamma[b] += c * p.semivariances[b];
      sum_lag[b] += c * p.mean_lags[b];
      out.pair_counts[b] += p.pair_counts[b];
    }
  }
  for (std::size_t b = 0; b < n; ++b) {
    const auto c = static_cast<double>(out.pair_counts[b]);
    out.semivariances[b] = c > 0 ? sum_gamma[b] / c : 0.0;
    out.mean_lags[b] = c > 0 ? sum_lag[b] / c : out.bin_centres[b];
  }
  return out;
}

namespace {

struct FitScale {
  double sill_guess;
  double max_lag;
};

FitScale scale_of(const EmpiricalVariogram& ev) {
  double max_gamma = 0.0, max_lag = 0.0;
  for (std::size_t b = 0; b < ev.semivariances.size(); ++b) {
    if (ev.pair_counts[b] == 0) continue;
    max_gamma = std::max(max_gamma, ev.semivariances[b]);
    max_lag = std::max(max_lag, ev.mean_lags[b]);
  }
  return {max_gamma, max_lag};
}

}  // namespace

VariogramFit fit(const EmpiricalVariogram& empirical, VariogramFamily family, double smoothness,
                 const VariogramModel& initial) {
  if (empirical.occupied_bins() < 3)
    throw VariogramFitError("variogram fit: need at least 3 occupied bins, have " +
                            std::to_string(empirical.occupied_bins()));
  const auto scale = scale_of(empirical);
  if (!(scale.sill_guess > 0.0))
    throw VariogramFitError("variogram fit: empirical semivariances are all zero");
  if (!(smoothness > 0.0)) throw std::invalid_argument("variogram fit: smoothness must be > 0");

  // Search in log space: (log nugget, log partial sill, log range).
  const double nugget_floor = 1e-8 * scale.sill_guess;
  const double sill_floor = 1e-8 * scale.sill_guess;
  const double sill_cap = 10.0 * scale.sill_guess;
  Box box{{std::log(nugget_floor), std::log(sill_floor), std::log(1e-3 * scale.max_lag)},
          {std::log(sill_cap), std::log(sill_cap), std::log(10.0 * scale.max_lag)}};

  VariogramModel trial{family, 1.0, 1.0, 1.0, smoothness};
  auto objective = [&](std::span<const double> p) {
    trial.nugget = std::exp(p[0]);
    trial.partial_sill = std::exp(p[1]);
    trial.range = std::exp(p[2]);
    double total = 0.0;
    for (std::size_t b = 0; b < empirical.semivariances.size(); ++b) {
      if (empirical.pair_counts[b] == 0) continue;
      const double model_gamma = evaluate(trial, empirical.mean_lags[b]);
      const double r = empirical.semivariances[b] - model_gamma;
      total += static_cast<double>(empirical.pair_counts[b]) * r * r / (model_gamma * model_gamma);
    }
    return total;
  };

  NelderMeadOptions nm;
  nm.max_evaluations = 6000;
  nm.f_tolerance = 1e-14;
  nm.x_tolerance = 1e-10;
  nm.restarts = 3;
  const std::vector<double> start = box.clamp(std::vector<double>{
      std::log(std::max(initial.nugget, nugget_floor)),
      std::log(std::max(initial.partial_sill, sill_floor)), std::log(initial.range)});
  const auto best = nelder_mead(objective, start, box, nm);

  VariogramFit out;
  out.model = {family, std::exp(best.x[0]), std::exp(best.x[1]), std::exp(best.x[2]), smoothness};
  out.objective = best.value;
  out.converged = best.converged;
  // No correlated structure left at the shortest observed lag: pure nugget.
  double shortest = scale.max_lag;
  for (std::size_t b = 0; b < empirical.semivariances.size(); ++b)
    if (empirical.pair_counts[b] > 0) shortest = std::min(shortest, empirical.mean_lags[b]);
  out.degenerate = best.x[1] <= box.lower[1] + 1e-6 || best.x[2] <= box.lower[2] + 1e-6 ||
                   out.model.partial_sill * correlation(out.model, shortest) < 1e-6 * out.model.total_sill();
  if (out.degenerate) {
    out.model.nugget += out.model.partial_sill;
    out.model.partial_sill = 0.0;
  }
  return out;
}

VariogramFit fit(const EmpiricalVariogram& empirical, VariogramFamily family, double smoothness) {
  if (empirical.occupied_bins() < 3)
    throw VariogramFitError("variogram fit: need at least 3 occupied bins, have " +
                            std::to_string(empirical.occupied_bins()));
  const auto scale = scale_of(empirical);
  if (!(scale.sill_guess > 0.0))
    throw VariogramFitError("variogram fit: empirical semivariances are all zero");
  double first_gamma = scale.sill_guess;
  for (std::size_t b = 0; b < empirical.semivariances.size(); ++b)
    if (empirical.pair_counts[b] > 0) {
      first_gamma = empirical.semivariances[b];
      break;
    }

  // A few starting ranges; keep the best local fit.
  std::optional<VariogramFit> best;
  for (double fraction : {0.05, 0.15, 0.4}) {
    const double nugget = std::max(0.5 * first_gamma, 1e-3 * scale.sill_guess);
    const VariogramModel initial{family, nugget,
                                 std::max(scale.sill_guess - nugget, 0.1 * scale.sill_guess),
                                 fraction * scale.max_lag, smoothness};
    auto candidate = fit(empirical, family, smoothness, initial);
    if (!best || candidate.objective < best->objective) best = std::move(candidate);
  }
  return *best;
}

nlohmann::json to_json(const VariogramModel& model) {
  return {{"family", to_string(model.family)},
          {"nugget", model.nugget},
          {"partial_sill", model.partial_sill},
          {"range", model.range},
          {"smoothness", model.smoothness}};
}

VariogramModel variogram_from_json(const nlohmann::json& j) {
  VariogramModel m;
  m.family = parse_family(j.at("family").get<std::string>());
  m.nugget = j.at("nugget").get<double>();
  m.partial_sill = j.at("partial_sill").get<double>();
  m.range = j.at("range").get<double>();
  m.smoothness = j.value("smoothness", m.family == VariogramFamily::exponential ? 0.5 : 1.0);
  m.validate();
  return m;
}

}  // namespace geocal
