#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace geocal {

using Objective = std::function<double(std::span<const double>)>;

/// Axis-aligned search box, lower[i] < upper[i].
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  void validate() const;
  std::vector<double> clamp(std::span<const double> x) const;
  bool contains(std::span<const double> x) const;
};

struct OptimizeResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  std::size_t max_evaluations = 2000;
  double f_tolerance = 1e-12;  // absolute spread of simplex values
  double x_tolerance = 1e-10;  // simplex diameter relative to box width
  double initial_step = 0.1;   // fraction of each box width
  int restarts = 2;            // re-initialise the simplex around the best point
};

/// Nelder-Mead with every trial point projected onto the box.
OptimizeResult nelder_mead(const Objective& f, std::span<const double> start, const Box& box,
                           const NelderMeadOptions& options = {});

struct DifferentialEvolutionOptions {
  std::size_t population_per_dim = 15;
  double mutation = 0.8;   // F
  double crossover = 0.9;  // CR
  std::size_t max_evaluations = 3000;
  std::size_t stall_generations = 30;  // stop after this many generations without improvement
  std::uint64_t seed = 0;
  std::vector<double> initial;  // optional population member, e.g. a previous optimum
};

/// DE/rand/1/bin over the box.
OptimizeResult differential_evolution(const Objective& f, const Box& box,
                                      const DifferentialEvolutionOptions& options = {});

struct GlobalOptions {
  DifferentialEvolutionOptions global;
  NelderMeadOptions local;
};

/// Differential evolution followed by a Nelder-Mead polish from its best point.
OptimizeResult minimize_in_box(const Objective& f, const Box& box, const GlobalOptions& options = {});

}  // namespace geocal
