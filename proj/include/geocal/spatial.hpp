#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geocal {

/// Planar site coordinates in km (easting, northing).
struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

double distance(const Location& a, const Location& b);

/// Raised for malformed input data (bad CSV cells, mismatched lengths, ...).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observed values at sites, with optional calibration weights in [0, 1].
class ObservationSet {
 public:
  ObservationSet() = default;
  ObservationSet(std::vector<Location> locations, std::vector<double> values,
                 std::optional<std::vector<double>> weights = std::nullopt);

  std::size_t size() const { return locations_.size(); }
  const std::vector<Location>& locations() const { return locations_; }
  const std::vector<double>& values() const { return values_; }
  const std::optional<std::vector<double>>& weights() const { return weights_; }

  ObservationSet with_values(std::vector<double> values) const;
  ObservationSet with_weights(std::vector<double> weights) const;
  ObservationSet with_locations(std::vector<Location> locations) const;

 private:
  std::vector<Location> locations_;
  std::vector<double> values_;
  std::optional<std::vector<double>> weights_;
};

/// Reads `x_km,y_km,value[,weight]` with a header row. Columns are matched by
/// header name; row numbers in error messages are 1-based file lines.
ObservationSet load_observations(const std::filesystem::path& path);

/// Reads a `x_km,y_km` site list (extra columns ignored).
std::vector<Location> load_locations(const std::filesystem::path& path);

void save_observations(const std::filesystem::path& path, const ObservationSet& obs);
void save_locations(const std::filesystem::path& path, const std::vector<Location>& sites);

Eigen::MatrixXd pairwise_distances(const std::vector<Location>& sites);
inline Eigen::MatrixXd pairwise_distances(const ObservationSet& obs) {
  return pairwise_distances(obs.locations());
}

struct ClusterAssignment {
  std::size_t k = 0;
  std::vector<Location> centres;
  std::vector<std::size_t> labels;
  double within_ss = 0.0;  // km^2
};

/// Lloyd's algorithm, at most 100 iterations. Initial centres are k distinct
/// data points drawn with `seed`; the best of a few seeded restarts is kept.
ClusterAssignment kmeans(const std::vector<Location>& sites, std::size_t k, std::uint64_t seed);
inline ClusterAssignment kmeans(const ObservationSet& obs, std::size_t k, std::uint64_t seed) {
  return kmeans(obs.locations(), k, seed);
}

/// Elbow of the within-cluster sum of squares curve W(1..k_max): the k in
/// 2..k_max-1 with the largest second difference of log W,
/// log W(k-1) - 2 log W(k) + log W(k+1). Returns 2 when k_max == 2.
std::size_t elbow_k(const std::vector<Location>& sites, std::size_t k_max, std::uint64_t seed);
inline std::size_t elbow_k(const ObservationSet& obs, std::size_t k_max, std::uint64_t seed) {
  return elbow_k(obs.locations(), k_max, seed);
}

/// Moves every site to centre + factor * (site - centre).
std::vector<Location> shrink_to_centres(const std::vector<Location>& sites,
                                        const ClusterAssignment& assignment, double factor);
ObservationSet shrink_to_centres(const ObservationSet& obs, const ClusterAssignment& assignment,
                                 double factor);

}  // namespace geocal
