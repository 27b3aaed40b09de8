#include "geocal/ci_weights.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace geocal {

namespace {

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
  const auto k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      out(i, j) = m(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]),
                    static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)]));
  return out;
}

double log_det_spd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw SingularCovarianceError("covariance submatrix is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

void check_indices(const CovarianceContext& ctx, std::size_t target,
                   std::span<const std::size_t> given) {
  if (target >= ctx.size()) throw std::out_of_range("target index out of range");
  for (auto g : given) {
    if (g >= ctx.size()) throw std::out_of_range("conditioning index out of range");
    if (g == target) throw std::invalid_argument("target appears in the conditioning set");
  }
}

}  // namespace

CovarianceContext::CovarianceContext(const VariogramModel& model, const std::vector<Location>& sites)
    : CovarianceContext(covariance_matrix(model, sites), model.sill_ratio()) {
  model.validate();
}

CovarianceContext::CovarianceContext(Eigen::MatrixXd covariance, double sill_ratio)
    : cov_(std::move(covariance)), llt_(cov_), sill_ratio_(sill_ratio) {
  if (cov_.rows() == 0 || cov_.rows() != cov_.cols())
    throw std::invalid_argument("covariance matrix must be square and non-empty");
  if (llt_.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_, Eigen::EigenvaluesOnly);
    throw SingularCovarianceError(
        "covariance matrix is not positive definite (eigenvalues in [" +
        std::to_string(eig.eigenvalues().minCoeff()) + ", " +
        std::to_string(eig.eigenvalues().maxCoeff()) + "])");
  }
}

double CovarianceContext::log_det(std::span<const std::size_t> subset) const {
  if (subset.empty()) return 0.0;
  return log_det_spd(submatrix(cov_, subset));
}

double CovarianceContext::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Eigen::VectorXd CovarianceContext::inverse_diagonal() const {
  const auto n = cov_.rows();
  // Sigma^-1 = L^-T L^-1, so diag(Sigma^-1)_i is the squared norm of column i of L^-1.
  Eigen::MatrixXd l_inv = Eigen::MatrixXd::Identity(n, n);
  llt_.matrixL().solveInPlace(l_inv);
  return l_inv.colwise().squaredNorm().transpose();
}

double univariate_entropy(double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("entropy: variance must be positive");
  return 0.5 * (1.0 + std::log(2.0 * std::numbers::pi) + std::log(variance));
}

double joint_entropy(const CovarianceContext& ctx, std::span<const std::size_t> subset) {
  if (subset.empty()) throw std::invalid_argument("joint entropy: empty subset");
  for (auto i : subset)
    if (i >= ctx.size()) throw std::out_of_range("joint entropy: index out of range");
  const double k = static_cast<double>(subset.size());
  return 0.5 * k + 0.5 * k * std::log(2.0 * std::numbers::pi) + 0.5 * ctx.log_det(subset);
}

double conditional_information(const CovarianceContext& ctx, std::size_t target,
                               std::span<const std::size_t> given) {
  check_indices(ctx, target, given);
  std::vector<std::size_t> joint(given.begin(), given.end());
  joint.push_back(target);
  const double log_ratio = ctx.log_det(joint) - ctx.log_det(given);
  return 0.5 * (1.0 + std::log(2.0 * std::numbers::pi) + log_ratio);
}

double variance_reduction_f1(const CovarianceContext& ctx, std::size_t target,
                             std::span<const std::size_t> given) {
  check_indices(ctx, target, given);
  const auto& cov = ctx.covariance();
  const auto t = static_cast<Eigen::Index>(target);
  const double sill = cov(t, t);
  if (given.empty()) return 0.0;

  const Eigen::MatrixXd sub = submatrix(cov, given);
  Eigen::VectorXd c(static_cast<Eigen::Index>(given.size()));
  for (std::size_t i = 0; i < given.size(); ++i)
    c(static_cast<Eigen::Index>(i)) = cov(static_cast<Eigen::Index>(given[i]), t);
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success)
    throw SingularCovarianceError("conditioning covariance is not positive definite");
  const double kriging_variance = sill - c.dot(llt.solve(c));
  return std::clamp(1.0 - kriging_variance / sill, 0.0, 1.0);
}

double f1_scale(double sill_ratio, std::size_t k) {
  if (!(sill_ratio > 0.0)) throw std::invalid_argument("f1 scale: sill ratio must be positive");
  const double m = sill_ratio;
  const double kd = static_cast<double>(k);
  return (m + 1.0) * (kd * m + 1.0) / ((kd + 1.0) * m * m);
}

WeightVector compute_weights(const std::vector<Location>& sites, const VariogramModel& model) {
  if (sites.size() < 2) throw std::invalid_argument("weights: need at least two observations");
  model.validate();
  const std::size_t n = sites.size();
  WeightVector out;
  out.w.assign(n, 1.0);
  out.f1.assign(n, 0.0);
  out.f1_star.assign(n, 0.0);
  out.ci.assign(n, univariate_entropy(model.total_sill()));

  if (model.partial_sill == 0.0) {
    out.warnings.emplace_back("variogram has no partial sill: no spatial dependence, all weights 1");
    return out;
  }

  const CovarianceContext ctx(model, sites);
  const Eigen::VectorXd inv_diag = ctx.inverse_diagonal();
  const double scale = f1_scale(ctx.sill_ratio(), n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double sill = ctx.covariance()(ii, ii);
    const double kriging_variance = 1.0 / inv_diag(ii);
    out.f1[i] = std::clamp(1.0 - kriging_variance / sill, 0.0, 1.0);
    out.ci[i] = univariate_entropy(kriging_variance);
    out.f1_star[i] = scale * out.f1[i];
    out.w[i] = std::clamp(1.0 - out.f1_star[i], 0.0, 1.0);
  }
  return out;
}

nlohmann::json diagnostics_json(const WeightVector& weights) {
  auto points = nlohmann::json::array();
  for (std::size_t i = 0; i < weights.w.size(); ++i)
    points.push_back({{"ci", weights.ci[i]},
                      {"f1", weights.f1[i]},
                      {"f1_star", weights.f1_star[i]},
                      {"w", weights.w[i]}});
  return points;
}

}  // namespace geocal
