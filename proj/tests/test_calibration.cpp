#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "geocal/calibration.hpp"
#include "geocal/gp_sim.hpp"
#include "oracles.hpp"

using namespace geocal;

TEST_CASE("Nelder-Mead and differential evolution on a quadratic") {
  const Box box{{-5, -5, -5}, {5, 5, 5}};
  auto f = [](std::span<const double> x) {
    return (x[0] - 1.2) * (x[0] - 1.2) + 3 * (x[1] + 0.7) * (x[1] + 0.7) + 0.5 * (x[2] - 2) * (x[2] - 2);
  };
  GlobalOptions opt;
  opt.global.seed = 4;
  const auto r = minimize_in_box(f, box, opt);
  CHECK(std::abs(r.x[0] - 1.2) < 1e-6);
  CHECK(std::abs(r.x[1] + 0.7) < 1e-6);
  CHECK(std::abs(r.x[2] - 2.0) < 1e-6);
  const auto again = minimize_in_box(f, box, opt);
  CHECK(again.x == r.x);

  const std::vector<double> start{4, 4, 4};
  const auto nm = nelder_mead(f, start, box);
  CHECK(std::abs(nm.x[1] + 0.7) < 1e-5);
}

TEST_CASE("minimum on the box boundary") {
  const Box box{{0, 0}, {1, 2}};
  auto f = [](std::span<const double> x) { return (x[0] + 3) * (x[0] + 3) + (x[1] - 5) * (x[1] - 5); };
  bool violated = false;
  auto guarded = [&](std::span<const double> x) {
    if (!box.contains(x)) violated = true;
    return f(x);
  };
  const auto r = minimize_in_box(guarded, box);
  CHECK_FALSE(violated);
  CHECK(std::abs(r.x[0]) < 1e-12);
  CHECK(std::abs(r.x[1] - 2.0) < 1e-12);
}

TEST_CASE("box validation") {
  CHECK_THROWS((Box{{0, 1}, {1, 1}}.validate()));
  CHECK_THROWS((Box{{0}, {1, 1}}.validate()));
  const Box b{{0, 0}, {1, 1}};
  CHECK(b.clamp(std::vector<double>{-1, 2}) == std::vector<double>{0, 1});
}

TEST_CASE("constant mean calibration recovers the sample mean") {
  const ObservationSet obs({{0, 0}, {1, 0}, {2, 3}, {8, 8}}, {1.5, -0.5, 4.0, 2.0});
  const auto model = ConstantMeanModel::spanning(obs.values());
  const auto out = optimize(model, obs, {}, 3);
  CHECK(std::abs(out.theta[0] - 1.75) < 1e-4);
  const std::vector<double> w{1, 0, 0, 1};
  CHECK(std::abs(optimize(model, obs, w, 3).theta[0] - 1.75) < 1e-4);
  const std::vector<double> w2{1, 1, 0, 0};
  CHECK(std::abs(optimize(model, obs, w2, 3).theta[0] - 0.5) < 1e-4);
}

TEST_CASE("toy plume surface") {
  const ToyPlumeModel plume;
  const Location c = plume.source();
  SUBCASE("radial symmetry without wind or elongation") {
    const std::vector<double> theta{50, 0, 0, 5, 1};
    const auto v = plume.predict(theta, {{c.x + 3, c.y}, {c.x, c.y + 3}});
    CHECK(v[0] == doctest::Approx(v[1]).epsilon(1e-14));
  }
  SUBCASE("peak sits at the offset source") {
    const std::vector<double> theta{50, 4, -2, 5, 1.6};
    const Location peak{c.x + 4, c.y - 2};
    const double top = plume.predict(theta, {peak})[0];
    for (double dx : {-0.1, 0.1})
      for (double dy : {-0.1, 0.0, 0.1}) CHECK(plume.predict(theta, {{peak.x + dx, peak.y + dy}})[0] < top);
    CHECK(top == doctest::Approx(50.0 / (2 * std::numbers::pi * 25 * 1.6)));
  }
  SUBCASE("linear in mass") {
    const std::vector<Location> s{{3, 4}, {25, 30}, {40, 10}};
    const auto a = plume.predict(std::vector<double>{10, 1, 2, 6, 1.2}, s);
    const auto b = plume.predict(std::vector<double>{20, 1, 2, 6, 1.2}, s);
    for (int i = 0; i < 3; ++i) CHECK(b[i] == doctest::Approx(2 * a[i]).epsilon(1e-14));
  }
  SUBCASE("integrates to the mass") {
    const std::vector<double> theta{120, 2, -1, 3, 1.5};
    std::vector<Location> grid;
    const double step = 0.1;
    for (double x = -5; x < 55; x += step)
      for (double y = -5; y < 55; y += step) grid.push_back({x + step / 2, y + step / 2});
    double total = 0;
    for (double v : plume.predict(theta, grid)) total += v * step * step;
    CHECK(total == doctest::Approx(120.0).epsilon(1e-6));
  }
  SUBCASE("log10 form agrees and does not underflow") {
    const std::vector<double> theta{80, 3, 3, 4, 2};
    const std::vector<Location> s{{20, 20}, {30, 35}};
    const auto p = plume.predict(theta, s), l = plume.predict_log10(theta, s);
    for (int i = 0; i < 2; ++i) CHECK(l[i] == doctest::Approx(std::log10(p[i])).epsilon(1e-12));
    CHECK(std::isfinite(plume.predict_log10(theta, {{5000, 5000}})[0]));
  }
  SUBCASE("invalid parameters") {
    const std::vector<Location> s{{0, 0}};
    CHECK_THROWS(plume.predict(std::vector<double>{-1, 0, 0, 5, 1}, s));
    CHECK_THROWS(plume.predict(std::vector<double>{1, 0, 0, 0, 1}, s));
    CHECK_THROWS(plume.predict(std::vector<double>{1, 0, 0, 5, 0.5}, s));
    CHECK_THROWS(plume.predict(std::vector<double>{1, 0, 0}, s));
  }
}

TEST_CASE("parameter file round trip") {
  const auto dir = oracle::scratch_dir("params");
  const std::vector<double> theta{1.0 / 3.0, -2e-9, 123456.789};
  write_parameter_file(dir / "p.txt", {"a", "b", "c"}, theta);
  const auto back = read_parameter_file(dir / "p.txt");
  REQUIRE(back.size() == 3);
  CHECK(back[0].first == "a");
  CHECK(back[0].second == theta[0]);
  CHECK(back[1].second == theta[1]);
  oracle::write_text(dir / "bad.txt", "a=1\nnonsense\n");
  CHECK_THROWS(read_parameter_file(dir / "bad.txt"));
}

TEST_CASE("external model adapter") {
  const auto dir = oracle::scratch_dir("external");
  const std::vector<Location> sites{{1, 1}, {2, 2}, {3, 3}};
  const std::vector<double> theta{0.5};
  SUBCASE("constant stub") {
    oracle::write_text(dir / "const.sh", "#!/bin/sh\nn=$(($(wc -l < \"$2\") - 1))\ni=0\nwhile [ $i -lt $n ]; do echo 4.25; i=$((i+1)); done > \"$3\"\n");
    const ExternalModel m("sh " + (dir / "const.sh").string() + " {params} {sites} {out}", {"a"}, Box{{0}, {1}});
    for (double v : m.predict(theta, sites)) CHECK(v == 4.25);
  }
  SUBCASE("wrong row count") {
    oracle::write_text(dir / "short.sh", "#!/bin/sh\necho 1 > \"$3\"\necho diagnostic-text\n");
    const ExternalModel m("sh " + (dir / "short.sh").string() + " {params} {sites} {out}", {"a"}, Box{{0}, {1}});
    CHECK_THROWS_WITH_AS(m.predict(theta, sites), doctest::Contains("expected 3 output rows, got 1"),
                         ExternalModelError);
    CHECK_THROWS_WITH_AS(m.predict(theta, sites), doctest::Contains("diagnostic-text"), ExternalModelError);
  }
  SUBCASE("nonzero exit status carries the output") {
    const ExternalModel m("echo broken-model; exit 3", {"a"}, Box{{0}, {1}});
    CHECK_THROWS_WITH_AS(m.predict(theta, sites), doctest::Contains("broken-model"), ExternalModelError);
  }
  SUBCASE("unparseable output") {
    const ExternalModel m("printf '1\\nxyz\\n3\\n' > {out}", {"a"}, Box{{0}, {1}});
    CHECK_THROWS_WITH_AS(m.predict(theta, sites), doctest::Contains("not numeric"), ExternalModelError);
  }
  SUBCASE("parameters reach the command") {
    const ExternalModel m("v=$(sed -n 's/^a=//p' {params}); for i in 1 2 3; do echo $v; done > {out}", {"a"},
                          Box{{0}, {1}});
    for (double v : m.predict(theta, sites)) CHECK(v == 0.5);
  }
}

TEST_CASE("model factory") {
  const auto plume = make_forward_model({{"model", "toy_plume"}, {"source", {10, 12}}, {"bounds", {{"mass", {5, 50}}}}});
  CHECK(plume->name() == "toy_plume");
  CHECK(plume->bounds().lower[0] == 5);
  CHECK(plume->bounds().upper[0] == 50);
  CHECK(plume->dimension() == 5);
  const std::vector<double> values{1, 5};
  const auto cm = make_forward_model({{"model", "constant_mean"}}, values);
  CHECK(cm->bounds().lower[0] < 1);
  CHECK(cm->bounds().upper[0] > 5);
  CHECK_THROWS(make_forward_model({{"model", "tephra"}}));
}

namespace {

ObservationSet plume_data(const std::vector<Location>& sites, const VariogramModel& residual, std::uint64_t seed) {
  const ToyPlumeModel plume;
  const std::vector<double> theta{100, 4, 3, 8, 1.5};
  auto log_surface = plume.predict_log10(theta, sites);
  const auto noise = simulate_gp(sites, residual, 0.0, seed).values();
  for (std::size_t i = 0; i < sites.size(); ++i) log_surface[i] = std::pow(10.0, log_surface[i] + noise[i]);
  return ObservationSet(sites, log_surface);
}

const VariogramModel kResidual{VariogramFamily::matern, 0.0105742, 0.04067892, 2.84104255, 1.0};

std::vector<Location> clustered_sites() {
  SamplingScheme s;
  s.kind = SchemeKind::clustered_layout;
  s.layout = named_layout("kelud_like");
  s.shrink_factor = 0.5;
  s.clusters = 5;
  return sample_locations(s, 1);
}

}  // namespace

TEST_CASE("iterative calibration trace") {
  const auto obs = plume_data(clustered_sites(), kResidual, 3);
  const ToyPlumeModel plume;
  CalibrationConfig config;
  config.log10_transform = true;
  config.seed = 5;
  const auto r = calibrate_iterative(plume, obs, config);
  REQUIRE(r.iterations.size() >= 2);
  CHECK_FALSE(r.iterations[0].max_dw.has_value());
  for (std::size_t i = 1; i < r.iterations.size(); ++i) {
    const auto& prev = r.iterations[i - 1].weights;
    const auto& cur = r.iterations[i].weights;
    double dw = 0;
    for (std::size_t j = 0; j < cur.size(); ++j) dw = std::max(dw, std::abs(cur[j] - prev[j]));
    CHECK(*r.iterations[i].max_dw == doctest::Approx(dw).epsilon(1e-15));
    CHECK(r.iterations[i].variogram.has_value());
  }
  if (r.converged) {
    CHECK(*r.iterations.back().max_dw < config.convergence_threshold);
    CHECK_FALSE(r.iterations.back().reoptimized);
  }
  // Clustered sites with correlated residuals get unequal weights and a different estimate.
  const auto& w = r.iterations[1].weights;
  CHECK(*std::min_element(w.begin(), w.end()) < 0.5);
  CHECK(r.theta() != r.iterations[0].theta);
  for (std::size_t i = 0; i < r.theta().size(); ++i) CHECK(plume.bounds().contains(r.theta()));

  const auto j = to_json(r);
  CHECK(j["iterations"].size() == r.iterations.size());
  CHECK(j["iterations"][1].contains("max_dw"));
  CHECK(j["theta"].contains("mass"));
}

TEST_CASE("zero reweighting iterations reproduce the unweighted fit") {
  const auto obs = plume_data(clustered_sites(), kResidual, 4);
  const ToyPlumeModel plume;
  CalibrationConfig a;
  a.log10_transform = true;
  a.seed = 9;
  a.cost = CostKind::mse;
  CalibrationConfig b = a;
  b.cost = CostKind::wmse;
  b.max_reweight_iterations = 0;
  const auto ra = calibrate_iterative(plume, obs, a), rb = calibrate_iterative(plume, obs, b);
  CHECK(ra.theta() == rb.theta());
  CHECK_FALSE(ra.converged);
  CHECK(ra.iterations.size() == 1);
  CHECK(ra.weighting_rounds() == 0);
  CHECK(ra.theta() == optimize(plume, obs, {}, 9, a.budget, true).theta);
}

TEST_CASE("unreachable threshold runs to the cap") {
  const auto obs = plume_data(clustered_sites(), kResidual, 6);
  const ToyPlumeModel plume;
  CalibrationConfig c;
  c.log10_transform = true;
  c.convergence_threshold = 0.0;
  c.max_reweight_iterations = 3;
  const auto r = calibrate_iterative(plume, obs, c);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations.size() == 4);
  CHECK(r.weighting_rounds() == 3);
}

TEST_CASE("residuals without structure short-circuit") {
  std::vector<Location> sites;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) sites.push_back({5.0 + 8 * i, 5.0 + 8 * j});
  const ObservationSet obs(sites, std::vector<double>(sites.size(), 2.5));
  const ConstantMeanModel model(0, 5);
  const auto r = calibrate_iterative(model, obs, CalibrationConfig{});
  CHECK(r.converged);
  CHECK(r.weighting_rounds() == 0);
  for (double w : r.iterations.back().weights) CHECK(w == 1.0);
  CHECK(r.theta() == r.iterations[0].theta);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("grid sites with pure-nugget residuals leave the estimate unchanged") {
  std::vector<Location> sites;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) sites.push_back({5.0 + 5 * i, 5.0 + 5 * j});
  const VariogramModel nugget_only{VariogramFamily::matern, 0.05, 0.0, 1.0, 1.0};
  const auto obs = plume_data(sites, nugget_only, 8);
  const ToyPlumeModel plume;
  CalibrationConfig c;
  c.log10_transform = true;
  c.seed = 2;
  const auto r = calibrate_iterative(plume, obs, c);
  const auto& w0 = r.iterations[0].theta;
  for (std::size_t i = 0; i < w0.size(); ++i) {
    const double scale = std::max(std::abs(w0[i]), 1.0);
    CHECK(std::abs(r.theta()[i] - w0[i]) / scale < 1e-3);
  }
}

TEST_CASE("configuration JSON") {
  const auto c = calibration_config_from_json(
      {{"cost", "mse"}, {"budget", 100}, {"convergence_threshold", 0.05}, {"log10", true}, {"seed", 7}});
  CHECK(c.cost == CostKind::mse);
  CHECK(c.budget == 100);
  CHECK(c.log10_transform);
  CHECK(calibration_config_from_json(to_json(c)).convergence_threshold == 0.05);
  CHECK_THROWS(calibration_config_from_json({{"cots", "mse"}}));
  CHECK_THROWS(calibration_config_from_json({{"cost", "mae"}}));
  CHECK_THROWS(calibration_config_from_json({{"budget", 0}}));
  CHECK_THROWS(calibration_config_from_json({{"convergence_threshold", -1}}));
}

TEST_CASE("log calibration needs positive data") {
  const ObservationSet obs({{0, 0}, {1, 1}}, {1.0, -2.0});
  CalibrationConfig c;
  c.log10_transform = true;
  CHECK_THROWS_AS(calibrate_iterative(ToyPlumeModel{}, obs, c), InputError);
}
