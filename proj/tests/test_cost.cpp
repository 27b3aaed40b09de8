#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "geocal/cost.hpp"
#include "oracles.hpp"

using namespace geocal;

TEST_CASE("mse and wmse") {
  const std::vector<double> y{0, 0}, yhat{1, 3}, w{1, 0.5};
  CHECK(wmse(y, yhat, w) == doctest::Approx(2.75));
  CHECK(mse(y, yhat) == doctest::Approx(5.0));
  CHECK(mse(y, y) == 0.0);
  CHECK(wmse(y, y, w) == 0.0);
  CHECK_THROWS_AS(mse(y, std::vector<double>{1}), std::invalid_argument);
  CHECK_THROWS_AS(wmse(y, yhat, std::vector<double>{1}), std::invalid_argument);
  CHECK_THROWS_AS(wmse(y, yhat, std::vector<double>{1, 1.5}), std::invalid_argument);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0, 3);
  std::vector<double> a(50), b(50), ones(50, 1.0);
  for (int i = 0; i < 50; ++i) {
    a[i] = g(rng);
    b[i] = g(rng);
  }
  CHECK(wmse(a, b, ones) == mse(a, b));
}

TEST_CASE("cost report contributions") {
  const std::vector<double> y{1, 2, 3}, yhat{2, 2, 5}, w{0.5, 1, 0.25};
  const auto r = cost_report(y, yhat, w);
  REQUIRE(r.per_point_contributions.size() == 3);
  CHECK(r.per_point_contributions[0] == doctest::Approx(0.5 / 3));
  CHECK(r.per_point_contributions[2] == doctest::Approx(1.0 / 3));
  double sum = 0;
  for (double c : r.per_point_contributions) sum += c;
  CHECK(r.value == doctest::Approx(sum));
  CHECK(r.weights_used == w);
}

TEST_CASE("absolute error costs") {
  const std::vector<double> y{0, 0}, yhat{1, -3}, w{1, 0.5};
  CHECK(mae(y, yhat) == doctest::Approx(2.0));
  CHECK(wmae(y, yhat, w) == doctest::Approx(1.25));
}

TEST_CASE("Gaussian negative log-likelihood") {
  const std::vector<double> y{0.3, -1.2};
  CHECK(gaussian_nll(y, y, 1.0) == doctest::Approx(2 * std::log(std::sqrt(2 * std::numbers::pi))).epsilon(1e-14));
  CHECK(gaussian_nll(y, y, 1.0) == doctest::Approx(1.8379).epsilon(1e-4));
  CHECK(gaussian_nll(y, y, 2.0) - gaussian_nll(y, y, 1.0) == doctest::Approx(2 * std::log(2.0)));
  CHECK_THROWS_AS(gaussian_nll(y, y, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_nll(y, y, -1.0), std::invalid_argument);

  std::mt19937_64 rng(19);
  std::normal_distribution<double> g(0, 2);
  std::uniform_real_distribution<double> s(0.1, 4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(10 + t), b(10 + t);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
    }
    const double sigma = s(rng), n = static_cast<double>(a.size());
    double direct = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      direct += (b[i] - a[i]) * (b[i] - a[i]) / (2 * sigma * sigma) + std::log(sigma * std::sqrt(2 * std::numbers::pi));
    const double identity = n * mse(a, b) / (2 * sigma * sigma) + n * std::log(sigma * std::sqrt(2 * std::numbers::pi));
    CHECK(std::abs(gaussian_nll(a, b, sigma) - identity) < 1e-10);
    CHECK(std::abs(gaussian_nll(a, b, sigma) - direct) < 1e-10);
  }
}

TEST_CASE("constant mean estimators") {
  const ObservationSet obs({{0, 0}, {1, 0}, {2, 0}}, {1, 2, 6});
  CHECK(estimate_mean(obs, MeanMode::unweighted) == doctest::Approx(3.0));
  const std::vector<double> ones{1, 1, 1};
  CHECK(estimate_mean(obs, MeanMode::weighted, std::span<const double>(ones)) == doctest::Approx(3.0));

  const ObservationSet two({{0, 0}, {5, 0}}, {0, 10});
  const std::vector<double> w{1, 0};
  CHECK(estimate_mean(two, MeanMode::weighted, std::span<const double>(w)) == 0.0);

  // Three identical observations weighted 1/3 count as one against an independent point.
  const ObservationSet triple({{0, 0}, {0, 0}, {0, 0}, {40, 40}}, {3, 3, 3, 9});
  const std::vector<double> third{1.0 / 3, 1.0 / 3, 1.0 / 3, 1};
  CHECK(estimate_mean(triple, MeanMode::weighted, std::span<const double>(third)) == doctest::Approx((3.0 + 9.0) / 2));

  const std::vector<double> a{0.2, 0.7, 0.4}, b{0.1, 0.35, 0.2};
  CHECK(estimate_mean(obs, MeanMode::weighted, std::span<const double>(a)) ==
        doctest::Approx(estimate_mean(obs, MeanMode::weighted, std::span<const double>(b))));

  const auto with_w = obs.with_weights({0.5, 0.5, 1.0});
  CHECK(estimate_mean(with_w, MeanMode::weighted) == doctest::Approx((0.5 + 1 + 6) / 2.0));

  const std::vector<double> zero{0, 0, 0};
  CHECK_THROWS(estimate_mean(obs, MeanMode::weighted, std::span<const double>(zero)));
  CHECK_THROWS(estimate_mean(obs, MeanMode::weighted));
}

TEST_CASE("GLS mean") {
  const std::vector<double> y{1.0, 4.0, -2.0, 7.5};
  SUBCASE("identity covariance gives the sample mean") {
    CHECK(std::abs(gls_mean(y, 2.3 * Eigen::MatrixXd::Identity(4, 4)) - 2.625) < 1e-8);
  }
  SUBCASE("diagonal covariance matches the weighted mean") {
    const std::vector<double> w{0.2, 1.0, 0.5, 0.8};
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 0; i < 4; ++i) c(i, i) = 3.0 / w[i];
    const ObservationSet obs({{0, 0}, {1, 0}, {2, 0}, {3, 0}}, y);
    CHECK(gls_mean(y, c) == doctest::Approx(estimate_mean(obs, MeanMode::weighted, std::span<const double>(w))));
  }
  SUBCASE("general covariance matches a direct solve") {
    const VariogramModel m{VariogramFamily::matern, 1, 4, 2.5, 1};
    const std::vector<Location> s{{0, 0}, {1, 0}, {1, 2}, {5, 5}};
    const auto c = covariance_matrix(m, s);
    oracle::Matrix a(4, std::vector<double>(4));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a[i][j] = c(i, j);
    const auto sy = oracle::solve(a, y);
    const auto s1 = oracle::solve(a, {1, 1, 1, 1});
    double num = 0, den = 0;
    for (int i = 0; i < 4; ++i) {
      num += sy[i];
      den += s1[i];
    }
    CHECK(gls_mean(y, c) == doctest::Approx(num / den).epsilon(1e-12));
  }
}

TEST_CASE("spatial maximum likelihood") {
  const auto truth = spatial_dependence_setting(DependenceLevel::mid);
  const auto obs = simulate_gp(named_layout("kelud_like"), truth, 3.0, 12);
  const auto r = spatial_ml_mean(obs);
  double mean_at_fit = 0;
  const double nll = profile_nll(obs, r.model, &mean_at_fit);
  CHECK(r.mean == doctest::Approx(mean_at_fit));
  const double constant = 0.5 * static_cast<double>(obs.size()) * std::log(2 * std::numbers::pi);
  CHECK(r.negative_log_likelihood == doctest::Approx(nll + constant));
  CHECK(r.model.smoothness == 1.0);
  CHECK(r.model.range >= 0.1);
  CHECK(r.model.nugget >= 1e-6);
  // The optimum is at least as good as the truth.
  CHECK(nll <= profile_nll(obs, truth) + 1e-9);
  CHECK(std::abs(r.mean - 3.0) < 3.0);
  CHECK_THROWS(spatial_ml_mean(ObservationSet({{0, 0}, {1, 1}, {2, 2}, {3, 3}}, {1, 2, 3, 4})));
}

TEST_CASE("profile likelihood under a pure nugget reduces to the sample mean") {
  const ObservationSet obs({{0, 0}, {3, 0}, {7, 1}, {2, 9}, {5, 5}}, {1, 2, 3, 4, 10});
  double mu = 0;
  profile_nll(obs, VariogramModel{VariogramFamily::matern, 2.0, 0.0, 1.0, 1.0}, &mu);
  CHECK(std::abs(mu - 4.0) < 1e-8);
}
