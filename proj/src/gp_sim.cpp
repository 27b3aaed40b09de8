#include "geocal/gp_sim.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#ifndef GEOCAL_DEFAULT_DATA_DIR
#define GEOCAL_DEFAULT_DATA_DIR "data"
#endif

namespace geocal {

double Rectangle::diagonal() const { return std::hypot(x_max - x_min, y_max - y_min); }

void Rectangle::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max))
    throw std::invalid_argument("sampling domain must have positive width and height");
}

void SamplingScheme::validate() const {
  if (n < 1) throw std::invalid_argument("sampling scheme: n must be >= 1");
  domain.validate();
  if (kind != SchemeKind::random_n && (!layout || layout->empty()))
    throw std::invalid_argument("sampling scheme: fixed and clustered layouts require a layout");
  if (shrink_factor && !(*shrink_factor >= 0.0 && *shrink_factor <= 1.0))
    throw std::invalid_argument("sampling scheme: shrink factor must lie in [0, 1]");
}

std::vector<Location> sample_locations(const SamplingScheme& scheme, std::uint64_t seed) {
  scheme.validate();
  switch (scheme.kind) {
    case SchemeKind::random_n: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> ux(scheme.domain.x_min, scheme.domain.x_max);
      std::uniform_real_distribution<double> uy(scheme.domain.y_min, scheme.domain.y_max);
      std::vector<Location> sites(scheme.n);
      for (auto& s : sites) {
        s.x = ux(rng);
        s.y = uy(rng);
      }
      return sites;
    }
    case SchemeKind::fixed_layout:
      return *scheme.layout;
    case SchemeKind::clustered_layout: {
      const auto& layout = *scheme.layout;
      const std::size_t k =
          scheme.clusters ? *scheme.clusters
                          : elbow_k(layout, std::min(scheme.elbow_k_max, layout.size()), seed);
      const auto assignment = kmeans(layout, k, seed);
      return shrink_to_centres(layout, assignment, scheme.shrink_factor.value_or(0.5));
    }
  }
  throw std::logic_error("unhandled sampling scheme");
}

std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

GaussianProcessSampler::GaussianProcessSampler(std::vector<Location> sites,
                                               const VariogramModel& truth)
    : sites_(std::move(sites)) {
  truth.validate();
  if (sites_.empty()) throw std::invalid_argument("simulate: no sites");
  const Eigen::MatrixXd cov = covariance_matrix(truth, sites_);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    throw std::runtime_error("simulate: covariance factorization failed (eigenvalues [" +
                             std::to_string(lo) + ", " + std::to_string(hi) +
                             "], condition estimate " + std::to_string(hi / lo) + ")");
  }
  lower_ = llt.matrixL();
}

std::vector<double> GaussianProcessSampler::draw(std::mt19937_64& rng, double mean) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(lower_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  const Eigen::VectorXd field = lower_.triangularView<Eigen::Lower>() * z;
  std::vector<double> out(static_cast<std::size_t>(field.size()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean + field(static_cast<Eigen::Index>(i));
  return out;
}

ObservationSet GaussianProcessSampler::draw_observations(std::mt19937_64& rng, double mean) const {
  return ObservationSet(sites_, draw(rng, mean));
}

ObservationSet simulate_gp(const std::vector<Location>& sites, const VariogramModel& truth,
                           double mean, std::uint64_t seed) {
  const GaussianProcessSampler sampler(sites, truth);
  std::mt19937_64 rng(seed);
  return sampler.draw_observations(rng, mean);
}

DependenceLevel parse_dependence(const std::string& name) {
  if (name == "low") return DependenceLevel::low;
  if (name == "mid") return DependenceLevel::mid;
  if (name == "high") return DependenceLevel::high;
  throw std::invalid_argument("unknown dependence level '" + name + "'");
}

std::string to_string(DependenceLevel level) {
  switch (level) {
    case DependenceLevel::low: return "low";
    case DependenceLevel::mid: return "mid";
    case DependenceLevel::high: return "high";
  }
  return "mid";
}

VariogramModel spatial_dependence_setting(DependenceLevel level) {
  switch (level) {
    case DependenceLevel::low: return {VariogramFamily::matern, 2.0, 3.0, 2.5, 1.0};
    case DependenceLevel::mid: return {VariogramFamily::matern, 1.0, 4.0, 2.5, 1.0};
    case DependenceLevel::high: return {VariogramFamily::matern, 1.0, 4.0, 3.5, 1.0};
  }
  throw std::logic_error("unhandled dependence level");
}

void SimulationBatch::validate() const {
  if (replicates < 1) throw std::invalid_argument("simulation batch: replicates must be >= 1");
  truth.validate();
}

std::vector<ObservationSet> simulate_batch(const std::vector<Location>& sites,
                                           const SimulationBatch& batch) {
  batch.validate();
  const GaussianProcessSampler sampler(sites, batch.truth);
  std::vector<ObservationSet> out;
  out.reserve(batch.replicates);
  for (std::size_t r = 0; r < batch.replicates; ++r) {
    auto rng = replicate_rng(batch.seed, r);
    out.push_back(sampler.draw_observations(rng, batch.mean));
  }
  return out;
}

nlohmann::json to_json(const SimulationBatch& batch) {
  return {{"replicates", batch.replicates},
          {"truth", to_json(batch.truth)},
          {"mean", batch.mean},
          {"seed", batch.seed}};
}

std::filesystem::path data_directory() {
  if (const char* env = std::getenv("GEOCAL_DATA_DIR"); env && *env) return env;
  return GEOCAL_DEFAULT_DATA_DIR;
}

std::vector<Location> named_layout(const std::string& name_or_path) {
  if (name_or_path == "kelud_like") return load_locations(data_directory() / "kelud_like_sites.csv");
  return load_locations(name_or_path);
}

}  // namespace geocal
