#include "geocal/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "csv.hpp"

namespace geocal {

double distance(const Location& a, const Location& b) { return std::hypot(a.x - b.x, a.y - b.y); }

ObservationSet::ObservationSet(std::vector<Location> locations, std::vector<double> values,
                               std::optional<std::vector<double>> weights)
    : locations_(std::move(locations)), values_(std::move(values)), weights_(std::move(weights)) {
  if (locations_.empty()) throw InputError("no observations");
  if (values_.size() != locations_.size())
    throw InputError("observation set: " + std::to_string(locations_.size()) + " locations but " +
                     std::to_string(values_.size()) + " values");
  for (const auto& s : locations_)
    if (!std::isfinite(s.x) || !std::isfinite(s.y))
      throw InputError("observation set: non-finite coordinate");
  if (weights_) {
    if (weights_->size() != locations_.size())
      throw InputError("observation set: weight count does not match observation count");
    for (double w : *weights_)
      if (!(w >= 0.0 && w <= 1.0)) throw InputError("observation set: weight outside [0, 1]");
  }
}

ObservationSet ObservationSet::with_values(std::vector<double> values) const {
  return ObservationSet(locations_, std::move(values), weights_);
}

ObservationSet ObservationSet::with_weights(std::vector<double> weights) const {
  return ObservationSet(locations_, values_, std::move(weights));
}

ObservationSet ObservationSet::with_locations(std::vector<Location> locations) const {
  return ObservationSet(std::move(locations), values_, weights_);
}

namespace {

double cell_value(const detail::CsvRow& row, int col, std::string_view name) {
  double v = 0.0;
  if (!detail::parse_double(row.cells[static_cast<std::size_t>(col)], v))
    throw InputError("row " + std::to_string(row.line) + ": non-numeric " + std::string(name) +
                     " '" + row.cells[static_cast<std::size_t>(col)] + "'");
  return v;
}

int required_column(const detail::CsvTable& t, std::string_view name,
                    const std::filesystem::path& path) {
  const int c = t.column(name);
  if (c < 0)
    throw InputError(path.string() + ": missing column '" + std::string(name) + "' in header");
  return c;
}

}  // namespace

ObservationSet load_observations(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("missing file: " + path.string());
  const auto table = detail::read_csv(path);
  if (table.header.empty() || table.rows.empty())
    throw InputError(path.string() + ": no observations");

  const int cx = required_column(table, "x_km", path);
  const int cy = required_column(table, "y_km", path);
  const int cv = required_column(table, "value", path);
  const int cw = table.column("weight");

  std::vector<Location> sites;
  std::vector<double> values;
  std::vector<double> weights;
  for (const auto& row : table.rows) {
    if (row.cells.size() != table.header.size())
      throw InputError("row " + std::to_string(row.line) + ": expected " +
                       std::to_string(table.header.size()) + " columns, found " +
                       std::to_string(row.cells.size()));
    sites.push_back({cell_value(row, cx, "x_km"), cell_value(row, cy, "y_km")});
    values.push_back(cell_value(row, cv, "value"));
    if (cw >= 0) {
      const double w = cell_value(row, cw, "weight");
      if (!(w >= 0.0 && w <= 1.0))
        throw InputError("row " + std::to_string(row.line) + ": weight outside [0, 1]");
      weights.push_back(w);
    }
  }
  if (cw >= 0) return ObservationSet(std::move(sites), std::move(values), std::move(weights));
  return ObservationSet(std::move(sites), std::move(values));
}

std::vector<Location> load_locations(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("missing file: " + path.string());
  const auto table = detail::read_csv(path);
  if (table.rows.empty()) throw InputError(path.string() + ": no sites");
  const int cx = required_column(table, "x_km", path);
  const int cy = required_column(table, "y_km", path);
  std::vector<Location> sites;
  for (const auto& row : table.rows) {
    if (row.cells.size() != table.header.size())
      throw InputError("row " + std::to_string(row.line) + ": column count mismatch");
    sites.push_back({cell_value(row, cx, "x_km"), cell_value(row, cy, "y_km")});
  }
  return sites;
}

void save_observations(const std::filesystem::path& path, const ObservationSet& obs) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  const auto& w = obs.weights();
  out << (w ? "x_km,y_km,value,weight\n" : "x_km,y_km,value\n");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    out << detail::format_double(obs.locations()[i].x) << ','
        << detail::format_double(obs.locations()[i].y) << ','
        << detail::format_double(obs.values()[i]);
    if (w) out << ',' << detail::format_double((*w)[i]);
    out << '\n';
  }
}

void save_locations(const std::filesystem::path& path, const std::vector<Location>& sites) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << "x_km,y_km\n";
  for (const auto& s : sites)
    out << detail::format_double(s.x) << ',' << detail::format_double(s.y) << '\n';
}

Eigen::MatrixXd pairwise_distances(const std::vector<Location>& sites) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d(i, j) = d(j, i) = distance(sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]);
  return d;
}

namespace {

constexpr int kMaxLloydIterations = 100;
constexpr int kRestarts = 10;

double squared(const Location& a, const Location& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// k-means++ seeding: every centre is one of the data points.
std::vector<Location> seed_centres(const std::vector<Location>& sites, std::size_t k,
                                   std::mt19937_64& rng) {
  std::vector<Location> centres;
  centres.reserve(k);
  std::uniform_int_distribution<std::size_t> pick(0, sites.size() - 1);
  centres.push_back(sites[pick(rng)]);
  std::vector<double> d2(sites.size());
  while (centres.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      double best = std::numeric_limits<double>::max();
      for (const auto& c : centres) best = std::min(best, squared(sites[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // Fewer distinct points than k: cycle through the data.
      centres.push_back(sites[centres.size() % sites.size()]);
      continue;
    }
    std::discrete_distribution<std::size_t> weighted(d2.begin(), d2.end());
    centres.push_back(sites[weighted(rng)]);
  }
  return centres;
}

ClusterAssignment lloyd(const std::vector<Location>& sites, std::vector<Location> centres) {
  const std::size_t k = centres.size();
  std::vector<std::size_t> labels(sites.size(), k);
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared(sites[i], centres[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    std::vector<Location> sums(k);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      sums[labels[i]].x += sites[i].x;
      sums[labels[i]].y += sites[i].y;
      ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0) centres[c] = {sums[c].x / counts[c], sums[c].y / counts[c]};
    if (!changed) break;
  }

  ClusterAssignment out;
  out.k = k;
  out.labels = std::move(labels);
  // Empty clusters keep their seed position; recompute members' means once more
  // so centres are exactly the means of the final labels.
  std::vector<Location> sums(k);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    sums[out.labels[i]].x += sites[i].x;
    sums[out.labels[i]].y += sites[i].y;
    ++counts[out.labels[i]];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0) centres[c] = {sums[c].x / counts[c], sums[c].y / counts[c]};
  out.centres = std::move(centres);
  for (std::size_t i = 0; i < sites.size(); ++i)
    out.within_ss += squared(sites[i], out.centres[out.labels[i]]);
  return out;
}

}  // namespace

ClusterAssignment kmeans(const std::vector<Location>& sites, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("kmeans: k must be positive");
  if (k > sites.size())
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " exceeds n = " +
                                std::to_string(sites.size()));
  std::mt19937_64 rng(seed);
  ClusterAssignment best;
  best.within_ss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < kRestarts; ++r) {
    auto candidate = lloyd(sites, seed_centres(sites, k, rng));
    if (candidate.within_ss < best.within_ss) best = std::move(candidate);
  }
  return best;
}

std::size_t elbow_k(const std::vector<Location>& sites, std::size_t k_max, std::uint64_t seed) {
  if (k_max < 2 || k_max > sites.size())
    throw std::invalid_argument("elbow_k: k_max must lie in [2, n]");
  if (k_max == 2) return 2;
  std::vector<double> log_wss(k_max + 1, 0.0);
  const double total = kmeans(sites, 1, seed).within_ss;
  if (!(total > 0.0)) return 2;
  // Floor keeps log finite when k reaches the number of distinct sites.
  const double floor = 1e-12 * total;
  for (std::size_t k = 1; k <= k_max; ++k)
    log_wss[k] = std::log(std::max(kmeans(sites, k, seed).within_ss, floor));
  std::size_t best_k = 2;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 2; k < k_max; ++k) {
    const double second = log_wss[k - 1] - 2.0 * log_wss[k] + log_wss[k + 1];
    if (second > best) {
      best = second;
      best_k = k;
    }
  }
  return best_k;
}

std::vector<Location> shrink_to_centres(const std::vector<Location>& sites,
                                        const ClusterAssignment& assignment, double factor) {
  if (!(factor >= 0.0 && factor <= 1.0))
    throw std::invalid_argument("shrink_to_centres: factor must lie in [0, 1]");
  if (assignment.labels.size() != sites.size())
    throw std::invalid_argument("shrink_to_centres: assignment does not match sites");
  if (factor == 1.0) return sites;
  std::vector<Location> out(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto& c = assignment.centres.at(assignment.labels[i]);
    out[i] = {c.x + factor * (sites[i].x - c.x), c.y + factor * (sites[i].y - c.y)};
  }
  return out;
}

ObservationSet shrink_to_centres(const ObservationSet& obs, const ClusterAssignment& assignment,
                                 double factor) {
  return obs.with_locations(shrink_to_centres(obs.locations(), assignment, factor));
}

}  // namespace geocal
