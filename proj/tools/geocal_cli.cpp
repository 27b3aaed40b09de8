#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "geocal/calibration.hpp"
#include "geocal/ci_weights.hpp"
#include "geocal/experiments.hpp"
#include "geocal/forward_model.hpp"
#include "geocal/gp_sim.hpp"
#include "geocal/variogram.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw geocal::InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw geocal::InputError("malformed JSON " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw geocal::InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void report_error(const std::string& kind, const std::string& message, int exit_code) {
  std::cerr << json{{"error", {{"type", kind}, {"message", message}, {"exit_code", exit_code}}}}.dump()
            << '\n';
}

struct FitVariogramArgs {
  std::string obs, out = "-", empirical, family = "matern";
  double smoothness = 1.0;
  std::size_t bins = 15;
  std::optional<double> max_dist;
  std::optional<std::uint64_t> seed;
};

void run_fit_variogram(const FitVariogramArgs& a) {
  const auto obs = geocal::load_observations(a.obs);
  const auto family = geocal::parse_family(a.family);
  const double smoothness = family == geocal::VariogramFamily::exponential ? 0.5 : a.smoothness;
  const auto emp = a.max_dist ? geocal::empirical_variogram(obs, a.bins, *a.max_dist)
                              : (a.bins == 15 ? geocal::empirical_variogram(obs)
                                              : geocal::empirical_variogram(
                                                    obs, a.bins,
                                                    0.5 * geocal::pairwise_distances(obs.locations()).maxCoeff()));
  const auto fitted = geocal::fit(emp, family, smoothness);
  if (!a.empirical.empty()) {
    ensure_parent(a.empirical);
    std::ofstream out(a.empirical);
    if (!out) throw geocal::InputError("cannot write " + a.empirical);
    out << "bin_lower,bin_upper,bin_centre,mean_lag,semivariance,pair_count\n";
    out.precision(17);
    for (std::size_t b = 0; b < emp.semivariances.size(); ++b)
      out << emp.bin_edges[b] << ',' << emp.bin_edges[b + 1] << ',' << emp.bin_centres[b] << ','
          << emp.mean_lags[b] << ',' << emp.semivariances[b] << ',' << emp.pair_counts[b] << '\n';
  }
  auto j = geocal::to_json(fitted.model);
  j["objective"] = fitted.objective;
  j["converged"] = fitted.converged;
  j["degenerate"] = fitted.degenerate;
  j["practical_range"] = geocal::practical_range(fitted.model);
  write_json(a.out, j);
}

struct WeightsArgs {
  std::string obs, model, out = "-", diagnostics;
  std::optional<std::uint64_t> seed;
};

void run_weights(const WeightsArgs& a) {
  const auto obs = geocal::load_observations(a.obs);
  const auto model = geocal::variogram_from_json(read_json(a.model));
  const auto w = geocal::compute_weights(obs, model);
  const auto weighted = obs.with_weights(w.w);
  if (a.out == "-") {
    std::cout << "weight\n";
    std::cout.precision(17);
    for (double v : w.w) std::cout << v << '\n';
  } else {
    ensure_parent(a.out);
    geocal::save_observations(a.out, weighted);
  }
  if (!a.diagnostics.empty()) {
    ensure_parent(a.diagnostics);
    write_json(a.diagnostics, {{"model", geocal::to_json(model)},
                               {"points", geocal::diagnostics_json(w)},
                               {"warnings", w.warnings}});
  }
  for (const auto& msg : w.warnings) std::cerr << json{{"warning", msg}}.dump() << '\n';
}

struct CalibrateArgs {
  std::string obs, model_spec, config, out = "-";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_reweight;
  std::optional<std::string> cost;
};

void run_calibrate(const CalibrateArgs& a) {
  const auto obs = geocal::load_observations(a.obs);
  json cfg = a.config.empty() ? json::object() : read_json(a.config);
  if (a.seed) cfg["seed"] = *a.seed;
  if (a.max_reweight) cfg["max_reweight_iterations"] = *a.max_reweight;
  if (a.cost) cfg["cost"] = *a.cost;
  const auto config = geocal::calibration_config_from_json(cfg);
  const auto model = geocal::make_forward_model(read_json(a.model_spec), obs.values());
  const auto result = geocal::calibrate_iterative(*model, obs, config);
  auto j = geocal::to_json(result);
  j["model"] = model->name();
  j["config"] = geocal::to_json(config);
  if (a.out != "-") ensure_parent(a.out);
  write_json(a.out, j);
}

struct SimulateArgs {
  std::string scenario, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
};

geocal::ExperimentScenario scenario_with_overrides(const std::string& path,
                                                   std::optional<std::uint64_t> seed,
                                                   std::optional<std::size_t> replicates) {
  auto s = geocal::load_scenario(path);
  if (seed) s.seed = *seed;
  if (replicates) s.replicates = *replicates;
  s.validate();
  return s;
}

void run_simulate(const SimulateArgs& a) {
  const auto s = scenario_with_overrides(a.scenario, a.seed, a.replicates);
  std::vector<geocal::Location> sites;
  const auto datasets = geocal::simulate_scenario(s, &sites);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  geocal::save_locations(dir / "sites.csv", sites);
  const int width = std::max<int>(3, static_cast<int>(std::to_string(datasets.size() - 1).size()));
  json files = json::array();
  for (std::size_t r = 0; r < datasets.size(); ++r) {
    std::string index = std::to_string(r);
    index.insert(0, static_cast<std::size_t>(std::max<int>(0, width - static_cast<int>(index.size()))), '0');
    const std::string name = "replicate_" + index + ".csv";
    geocal::save_observations(dir / name, datasets[r]);
    files.push_back(name);
  }
  write_json(dir / "manifest.json", {{"scenario", s.name},
                                     {"seed", s.seed},
                                     {"replicates", s.replicates},
                                     {"truth", geocal::to_json(s.residual_truth())},
                                     {"sites", "sites.csv"},
                                     {"datasets", files}});
}

struct ExperimentArgs {
  std::string scenario, summary = "-", replicate_csv;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
};

void run_experiment(const ExperimentArgs& a) {
  const auto s = scenario_with_overrides(a.scenario, a.seed, a.replicates);
  const auto result = geocal::run_scenario(s);
  auto j = geocal::to_json(result);
  j["seed"] = s.seed;
  j["replicates"] = s.replicates;
  if (a.summary != "-") ensure_parent(a.summary);
  write_json(a.summary, j);
  if (!a.replicate_csv.empty()) {
    ensure_parent(a.replicate_csv);
    geocal::write_replicate_csv(a.replicate_csv, result);
  }
}

struct PredictArgs {
  std::string model_spec, params, sites, out;
  std::optional<std::uint64_t> seed;
};

void run_predict(const PredictArgs& a) {
  const auto model = geocal::make_forward_model(read_json(a.model_spec));
  const auto names = model->parameter_names();
  const auto pairs = geocal::read_parameter_file(a.params);
  std::vector<double> theta;
  for (const auto& name : names) {
    auto it = std::find_if(pairs.begin(), pairs.end(), [&](const auto& p) { return p.first == name; });
    if (it == pairs.end()) throw geocal::InputError("parameter file lacks '" + name + "'");
    theta.push_back(it->second);
  }
  const auto values = model->predict(theta, geocal::load_locations(a.sites));
  std::ofstream out(a.out);
  if (!out) throw geocal::InputError("cannot write " + a.out);
  out.precision(17);
  for (double v : values) out << v << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially weighted model calibration"};
  app.require_subcommand(1);

  FitVariogramArgs fv;
  auto* fit_cmd = app.add_subcommand("fit-variogram", "Fit a variogram to observation residuals");
  fit_cmd->add_option("--obs", fv.obs, "CSV with x_km,y_km,value")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fv.out, "model JSON ('-' for stdout)");
  fit_cmd->add_option("--empirical", fv.empirical, "empirical variogram CSV");
  fit_cmd->add_option("--family", fv.family, "matern or exponential")
      ->check(CLI::IsMember({"matern", "exponential"}));
  fit_cmd->add_option("--smoothness", fv.smoothness, "Matern smoothness")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--bins", fv.bins, "number of lag bins")->check(CLI::Range(1, 1000));
  fit_cmd->add_option("--max-dist", fv.max_dist, "largest lag (km)")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--seed", fv.seed, "random seed (fit is deterministic)");

  WeightsArgs wa;
  auto* weights_cmd = app.add_subcommand("weights", "Conditional-information calibration weights");
  weights_cmd->add_option("--obs", wa.obs, "CSV with x_km,y_km,value")->required()->check(CLI::ExistingFile);
  weights_cmd->add_option("--model", wa.model, "variogram model JSON")->required()->check(CLI::ExistingFile);
  weights_cmd->add_option("--out", wa.out, "weights CSV ('-' for stdout)");
  weights_cmd->add_option("--diagnostics", wa.diagnostics, "per-point diagnostics JSON");
  weights_cmd->add_option("--seed", wa.seed, "random seed (weights are deterministic)");

  CalibrateArgs ca;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Iteratively reweighted calibration");
  calibrate_cmd->add_option("--obs", ca.obs, "CSV with x_km,y_km,value")->required()->check(CLI::ExistingFile);
  calibrate_cmd->add_option("--model-spec", ca.model_spec, "forward model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  calibrate_cmd->add_option("--config", ca.config, "calibration config JSON")->check(CLI::ExistingFile);
  calibrate_cmd->add_option("--out", ca.out, "result JSON ('-' for stdout)");
  calibrate_cmd->add_option("--seed", ca.seed, "optimizer seed (overrides config)");
  calibrate_cmd->add_option("--max-reweight-iterations", ca.max_reweight, "overrides config");
  calibrate_cmd->add_option("--cost", ca.cost, "mse or wmse (overrides config)")
      ->check(CLI::IsMember({"mse", "wmse"}));

  SimulateArgs sa;
  auto* simulate_cmd = app.add_subcommand("simulate", "Write the simulated datasets of a scenario");
  simulate_cmd->add_option("--scenario", sa.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--out-dir", sa.out_dir, "output directory")->required();
  simulate_cmd->add_option("--seed", sa.seed, "overrides the scenario seed");
  simulate_cmd->add_option("--replicates", sa.replicates, "overrides the replicate count")
      ->check(CLI::PositiveNumber);

  ExperimentArgs ea;
  auto* experiment_cmd = app.add_subcommand("experiment", "Run a simulation study");
  experiment_cmd->add_option("--scenario", ea.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  experiment_cmd->add_option("--summary", ea.summary, "summary JSON ('-' for stdout)");
  experiment_cmd->add_option("--replicate-csv", ea.replicate_csv, "per-replicate estimates CSV");
  experiment_cmd->add_option("--seed", ea.seed, "overrides the scenario seed");
  experiment_cmd->add_option("--replicates", ea.replicates, "overrides the replicate count")
      ->check(CLI::PositiveNumber);

  PredictArgs pa;
  auto* predict_cmd = app.add_subcommand("predict", "Evaluate a forward model (external-model protocol)");
  predict_cmd->add_option("--model-spec", pa.model_spec, "forward model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--params", pa.params, "name=value parameter file")->required();
  predict_cmd->add_option("--sites", pa.sites, "x_km,y_km CSV")->required();
  predict_cmd->add_option("--out", pa.out, "one prediction per line")->required();
  predict_cmd->add_option("--seed", pa.seed, "unused; accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << '\n';
    report_error("usage", e.what(), 2);
    return 2;
  }

  try {
    if (*fit_cmd) run_fit_variogram(fv);
    else if (*weights_cmd) run_weights(wa);
    else if (*calibrate_cmd) run_calibrate(ca);
    else if (*simulate_cmd) run_simulate(sa);
    else if (*experiment_cmd) run_experiment(ea);
    else if (*predict_cmd) run_predict(pa);
  } catch (const geocal::InputError& e) {
    report_error("input", e.what(), 1);
    return 1;
  } catch (const std::invalid_argument& e) {
    report_error("invalid_argument", e.what(), 1);
    return 1;
  } catch (const json::exception& e) {
    report_error("config", e.what(), 1);
    return 1;
  } catch (const std::exception& e) {
    report_error("runtime", e.what(), 1);
    return 1;
  }
  return 0;
}
