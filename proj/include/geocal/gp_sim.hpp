#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "geocal/spatial.hpp"
#include "geocal/variogram.hpp"

namespace geocal {

struct Rectangle {
  double x_min = 0.0, x_max = 50.0;
  double y_min = 0.0, y_max = 50.0;

  double diagonal() const;
  void validate() const;
};

enum class SchemeKind { random_n, fixed_layout, clustered_layout };

struct SamplingScheme {
  SchemeKind kind = SchemeKind::random_n;
  std::size_t n = 80;
  Rectangle domain;
  std::optional<std::vector<Location>> layout;
  std::optional<double> shrink_factor;    // clustered_layout, default 0.5
  std::optional<std::size_t> clusters;    // clustered_layout; elbow method when absent
  std::size_t elbow_k_max = 10;

  void validate() const;
};

std::vector<Location> sample_locations(const SamplingScheme& scheme, std::uint64_t seed);

/// Independent stream for replicate `index` of a batch seeded with `seed`.
std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t index);

/// Draws the Gaussian process at `sites` with a constant mean.
ObservationSet simulate_gp(const std::vector<Location>& sites, const VariogramModel& truth,
                           double mean, std::uint64_t seed);

/// Reusable sampler: the covariance factorization is computed once.
class GaussianProcessSampler {
 public:
  GaussianProcessSampler(std::vector<Location> sites, const VariogramModel& truth);

  std::vector<double> draw(std::mt19937_64& rng, double mean = 0.0) const;
  ObservationSet draw_observations(std::mt19937_64& rng, double mean = 0.0) const;
  const std::vector<Location>& sites() const { return sites_; }

 private:
  std::vector<Location> sites_;
  Eigen::MatrixXd lower_;
};

enum class DependenceLevel { low, mid, high };

DependenceLevel parse_dependence(const std::string& name);
std::string to_string(DependenceLevel level);

/// Reference Matern truths: mid (1, 4, 2.5), low (2, 3, 2.5), high (1, 4, 3.5); smoothness 1.
VariogramModel spatial_dependence_setting(DependenceLevel level);

struct SimulationBatch {
  std::size_t replicates = 100;
  VariogramModel truth = spatial_dependence_setting(DependenceLevel::mid);
  double mean = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Simulates every replicate of the batch at fixed sites.
std::vector<ObservationSet> simulate_batch(const std::vector<Location>& sites,
                                           const SimulationBatch& batch);

nlohmann::json to_json(const SimulationBatch& batch);

/// Directory holding bundled data (layouts, scenarios). `GEOCAL_DATA_DIR`
/// overrides the compiled-in location.
std::filesystem::path data_directory();

/// Resolves a layout name ("kelud_like") or a CSV path to site coordinates.
std::vector<Location> named_layout(const std::string& name_or_path);

}  // namespace geocal
