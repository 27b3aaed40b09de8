#include "geocal/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string_view>

#include "csv.hpp"
#include "geocal/cost.hpp"

namespace geocal {

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::unweighted: return "unweighted";
    case Estimator::weighted: return "weighted";
    case Estimator::spatial_ml: return "spatial_ml";
  }
  return "unweighted";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "unweighted") return Estimator::unweighted;
  if (name == "weighted") return Estimator::weighted;
  if (name == "spatial_ml") return Estimator::spatial_ml;
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

bool ExperimentScenario::constant_mean() const {
  return forward_model.at("model").get<std::string>() == "constant_mean";
}

VariogramModel ExperimentScenario::residual_truth() const {
  return truth ? *truth : spatial_dependence_setting(dependence);
}

void ExperimentScenario::validate() const {
  if (replicates < 1) throw std::invalid_argument("scenario: replicates must be >= 1");
  if (estimators.empty()) throw std::invalid_argument("scenario: no estimators");
  scheme.validate();
  residual_truth().validate();
  calibration.validate();
  const bool has_ml =
      std::find(estimators.begin(), estimators.end(), Estimator::spatial_ml) != estimators.end();
  if (!constant_mean()) {
    if (has_ml) throw std::invalid_argument("scenario: spatial_ml supports the constant_mean model only");
    const auto model = make_forward_model(forward_model);
    if (true_theta.size() != model->dimension())
      throw std::invalid_argument("scenario: true_theta needs " + std::to_string(model->dimension()) +
                                  " values");
  }
}

namespace {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                         const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
}

SamplingScheme scheme_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  reject_unknown_keys(j, {"kind", "n", "domain", "layout", "shrink_factor", "clusters", "elbow_k_max"},
                      "scenario scheme");
  SamplingScheme s;
  const auto kind = j.value("kind", std::string("random_n"));
  if (kind == "random_n") s.kind = SchemeKind::random_n;
  else if (kind == "fixed_layout") s.kind = SchemeKind::fixed_layout;
  else if (kind == "clustered_layout") s.kind = SchemeKind::clustered_layout;
  else throw std::invalid_argument("scenario: unknown sampling scheme '" + kind + "'");
  s.n = j.value("n", s.n);
  if (j.contains("domain")) {
    const auto& d = j["domain"];
    s.domain = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>(),
                d.at(3).get<double>()};
  }
  if (j.contains("layout")) {
    const auto& l = j["layout"];
    if (l.is_string()) {
      const auto name = l.get<std::string>();
      const std::filesystem::path p(name);
      s.layout = name == "kelud_like" || p.is_absolute() || base_dir.empty()
                     ? named_layout(name)
                     : named_layout((base_dir / p).string());
    } else {
      std::vector<Location> sites;
      for (const auto& pt : l) sites.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
      s.layout = std::move(sites);
    }
    if (s.kind != SchemeKind::random_n) s.n = s.layout->size();
  }
  if (j.contains("shrink_factor")) s.shrink_factor = j["shrink_factor"].get<double>();
  if (j.contains("clusters")) s.clusters = j["clusters"].get<std::size_t>();
  s.elbow_k_max = j.value("elbow_k_max", s.elbow_k_max);
  return s;
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ExperimentScenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  reject_unknown_keys(j, {"name", "scheme", "dependence", "truth", "replicates", "estimators",
                          "forward_model", "true_mean", "true_theta", "calibration", "seed"},
                      "scenario");
  ExperimentScenario s;
  s.name = j.value("name", s.name);
  if (j.contains("scheme")) s.scheme = scheme_from_json(j["scheme"], base_dir);
  if (j.contains("dependence")) s.dependence = parse_dependence(j["dependence"].get<std::string>());
  if (j.contains("truth")) s.truth = variogram_from_json(j["truth"]);
  s.replicates = j.value("replicates", s.replicates);
  if (j.contains("estimators")) {
    s.estimators.clear();
    for (const auto& e : j["estimators"]) s.estimators.push_back(parse_estimator(e.get<std::string>()));
  }
  if (j.contains("forward_model")) {
    const auto& fm = j["forward_model"];
    s.forward_model = fm.is_string() ? nlohmann::json{{"model", fm.get<std::string>()}} : fm;
  }
  s.true_mean = j.value("true_mean", s.true_mean);
  if (j.contains("true_theta")) {
    const auto& t = j["true_theta"];
    if (t.is_array()) {
      s.true_theta = t.get<std::vector<double>>();
    } else {
      const auto model = make_forward_model(s.forward_model);
      for (const auto& name : model->parameter_names()) s.true_theta.push_back(t.at(name).get<double>());
    }
  }
  if (j.contains("calibration")) s.calibration = calibration_config_from_json(j["calibration"]);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

ExperimentScenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed scenario JSON " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j, path.parent_path());
}

Summary summarize(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw std::invalid_argument("summarize: no estimates");
  const double med = median({estimates.begin(), estimates.end()});
  std::vector<double> dev(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) dev[i] = std::abs(estimates[i] - med);
  const double mad = median(std::move(dev));
  Summary s;
  if (truth == 0.0) {
    s.percentage = false;
    s.median_bias = med;
    s.mad = mad;
  } else {
    s.median_bias = 100.0 * (med - truth) / std::abs(truth);
    s.mad = 100.0 * mad / std::abs(truth);
  }
  return s;
}

const ParameterSummary& EstimatorSummary::parameter(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.parameter == name) return p;
  throw std::out_of_range("no summary for parameter '" + name + "'");
}

const EstimatorSummary& ScenarioResult::estimator(Estimator e) const {
  for (const auto& s : estimators)
    if (s.estimator == e) return s;
  throw std::out_of_range("estimator " + to_string(e) + " was not run");
}

std::vector<ObservationSet> simulate_scenario(const ExperimentScenario& scenario,
                                              std::vector<Location>* sites_out) {
  scenario.validate();
  auto sites = sample_locations(scenario.scheme, scenario.seed);
  const GaussianProcessSampler sampler(sites, scenario.residual_truth());

  std::vector<double> surface(sites.size(), scenario.true_mean);
  bool log_scale = false;
  if (!scenario.constant_mean()) {
    const auto model = make_forward_model(scenario.forward_model);
    log_scale = scenario.calibration.log10_transform;
    surface = log_scale ? model->predict_log10(scenario.true_theta, sites)
                        : model->predict(scenario.true_theta, sites);
  }

  std::vector<ObservationSet> out;
  out.reserve(scenario.replicates);
  for (std::size_t r = 0; r < scenario.replicates; ++r) {
    auto rng = replicate_rng(scenario.seed, r);
    auto values = sampler.draw(rng, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] += surface[i];
      if (log_scale) values[i] = std::pow(10.0, values[i]);
    }
    out.emplace_back(sites, std::move(values));
  }
  if (sites_out) *sites_out = std::move(sites);
  return out;
}

ScenarioResult run_scenario(const ExperimentScenario& scenario) {
  ScenarioResult result;
  result.name = scenario.name;
  result.truth = scenario.residual_truth();
  const auto datasets = simulate_scenario(scenario, &result.sites);

  const auto has = [&](Estimator e) {
    return std::find(scenario.estimators.begin(), scenario.estimators.end(), e) !=
           scenario.estimators.end();
  };
  std::vector<std::string> names;
  std::vector<double> truths;
  if (scenario.constant_mean()) {
    names = {"mean"};
    truths = {scenario.true_mean};
  } else {
    names = make_forward_model(scenario.forward_model)->parameter_names();
    truths = scenario.true_theta;
  }

  std::map<Estimator, std::vector<std::vector<double>>> estimates;  // estimator -> replicate -> theta
  for (std::size_t r = 0; r < datasets.size(); ++r) {
    const auto& obs = datasets[r];
    try {
      const auto model = make_forward_model(scenario.forward_model, obs.values());
      if (has(Estimator::unweighted) || has(Estimator::weighted)) {
        auto config = scenario.calibration;
        config.seed = scenario.calibration.seed + 7919 * (r + 1);
        if (!has(Estimator::weighted)) config.cost = CostKind::mse;
        const auto cal = calibrate_iterative(*model, obs, config);
        if (has(Estimator::unweighted)) estimates[Estimator::unweighted].push_back(cal.iterations.front().theta);
        if (has(Estimator::weighted)) {
          estimates[Estimator::weighted].push_back(cal.theta());
          result.weighting_rounds.push_back(cal.weighting_rounds());
          result.converged.push_back(cal.converged);
          result.first_round_max_dw.push_back(
              cal.iterations.size() > 2 && cal.iterations[2].max_dw ? *cal.iterations[2].max_dw : 0.0);
        }
      }
      if (has(Estimator::spatial_ml)) {
        const auto ml = spatial_ml_mean(obs, scenario.calibration.smoothness);
        estimates[Estimator::spatial_ml].push_back({ml.mean});
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("replicate " + std::to_string(r) + ": " + e.what());
    }
  }

  for (auto e : scenario.estimators) {
    EstimatorSummary summary{e, {}};
    const auto& rows = estimates[e];
    for (std::size_t p = 0; p < names.size(); ++p) {
      ParameterSummary ps;
      ps.parameter = names[p];
      ps.truth = truths[p];
      for (std::size_t r = 0; r < rows.size(); ++r) {
        ps.estimates.push_back(rows[r][p]);
        result.records.push_back({r, e, names[p], rows[r][p]});
      }
      ps.summary = summarize(ps.estimates, ps.truth);
      for (double v : ps.estimates) ps.mean += v;
      ps.mean /= static_cast<double>(ps.estimates.size());
      ps.sd = sample_sd(ps.estimates);
      summary.parameters.push_back(std::move(ps));
    }
    result.estimators.push_back(std::move(summary));
  }
  std::sort(result.records.begin(), result.records.end(), [](const auto& a, const auto& b) {
    return a.replicate != b.replicate ? a.replicate < b.replicate : a.estimator < b.estimator;
  });
  return result;
}

nlohmann::json to_json(const ScenarioResult& result) {
  auto estimators = nlohmann::json::object();
  for (const auto& e : result.estimators) {
    auto params = nlohmann::json::object();
    for (const auto& p : e.parameters) {
      const std::string suffix = p.summary.percentage ? "_pct" : "_abs";
      params[p.parameter] = {{"truth", p.truth},
                             {"median_bias" + suffix, p.summary.median_bias},
                             {"median_abs_deviation" + suffix, p.summary.mad},
                             {"percentage", p.summary.percentage},
                             {"mean", p.mean},
                             {"sd", p.sd},
                             {"estimates", p.estimates}};
    }
    estimators[to_string(e.estimator)] = params;
  }
  nlohmann::json out{{"name", result.name},
                     {"truth", to_json(result.truth)},
                     {"n_sites", result.sites.size()},
                     {"estimators", estimators}};
  if (!result.weighting_rounds.empty()) {
    std::map<std::size_t, std::size_t> histogram;
    for (auto r : result.weighting_rounds) ++histogram[r];
    auto h = nlohmann::json::object();
    for (const auto& [rounds, count] : histogram) h[std::to_string(rounds)] = count;
    out["reweighting"] = {{"rounds_histogram", h},
                          {"converged", std::count(result.converged.begin(), result.converged.end(), true)},
                          {"first_round_max_dw", result.first_round_max_dw}};
  }
  return out;
}

void write_replicate_csv(const std::filesystem::path& path, const ScenarioResult& result) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "replicate,estimator,parameter,estimate\n";
  for (const auto& r : result.records)
    out << r.replicate << ',' << to_string(r.estimator) << ',' << r.parameter << ','
        << detail::format_double(r.estimate) << '\n';
}

}  // namespace geocal
