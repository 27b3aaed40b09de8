#include "geocal/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace geocal {

void Box::validate() const {
  if (lower.empty() || lower.size() != upper.size())
    throw std::invalid_argument("box: lower and upper bounds must be non-empty and equally long");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i]))
      throw std::invalid_argument("box: bounds must be finite with lower < upper");
}

std::vector<double> Box::clamp(std::span<const double> x) const {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], lower[i], upper[i]);
  return out;
}

bool Box::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  return true;
}

namespace {

struct Counted {
  const Objective& f;
  std::size_t count = 0;

  double operator()(std::span<const double> x) {
    ++count;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  }
};

// One Nelder-Mead descent; returns true if the tolerances were met.
bool descend(Counted& f, const Box& box, std::vector<double>& best_x, double& best_f,
             const NelderMeadOptions& opt) {
  const std::size_t n = box.dim();
  std::vector<std::vector<double>> simplex(n + 1, best_x);
  std::vector<double> values(n + 1);
  values[0] = best_f;
  for (std::size_t i = 0; i < n; ++i) {
    const double width = box.upper[i] - box.lower[i];
    auto& v = simplex[i + 1];
    double step = opt.initial_step * width;
    // Step away from a bound the start point sits on.
    if (v[i] + step > box.upper[i]) step = -step;
    v[i] = std::clamp(v[i] + step, box.lower[i], box.upper[i]);
    values[i + 1] = f(v);
  }

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n);
  auto point = [&](double t, const std::vector<double>& worst) {
    std::vector<double> p(n);
    for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + t * (worst[j] - centroid[j]);
    return box.clamp(p);
  };

  while (f.count < opt.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    const auto lo = order.front(), hi = order.back(), second = order[n - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        diameter = std::max(diameter, std::abs(simplex[i][j] - simplex[lo][j]) /
                                          (box.upper[j] - box.lower[j]));
    const double spread = values[hi] - values[lo];
    if ((spread <= opt.f_tolerance * (1.0 + std::abs(values[lo])) && diameter <= opt.x_tolerance) ||
        diameter <= 1e-15) {
      best_x = simplex[lo];
      best_f = values[lo];
      return true;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != hi)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);

    const auto reflected = point(-1.0, simplex[hi]);
    const double fr = f(reflected);
    if (fr < values[lo]) {
      const auto expanded = point(-2.0, simplex[hi]);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[hi] = expanded;
        values[hi] = fe;
      } else {
        simplex[hi] = reflected;
        values[hi] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[hi] = reflected;
      values[hi] = fr;
      continue;
    }
    const bool outside = fr < values[hi];
    const auto contracted = outside ? point(-0.5, simplex[hi]) : point(0.5, simplex[hi]);
    const double fc = f(contracted);
    if (fc < std::min(fr, values[hi])) {
      simplex[hi] = contracted;
      values[hi] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == lo) continue;
      for (std::size_t j = 0; j < n; ++j)
        simplex[i][j] = simplex[lo][j] + 0.5 * (simplex[i][j] - simplex[lo][j]);
      values[i] = f(simplex[i]);
    }
  }
  const auto lo = static_cast<std::size_t>(
      std::min_element(values.begin(), values.end()) - values.begin());
  best_x = simplex[lo];
  best_f = values[lo];
  return false;
}

}  // namespace

OptimizeResult nelder_mead(const Objective& f, std::span<const double> start, const Box& box,
                           const NelderMeadOptions& options) {
  box.validate();
  if (start.size() != box.dim())
    throw std::invalid_argument("nelder_mead: start point dimension does not match box");
  Counted counted{f};
  OptimizeResult result;
  result.x = box.clamp(start);
  result.value = counted(result.x);
  result.converged = descend(counted, box, result.x, result.value, options);
  for (int r = 0; r < options.restarts && counted.count < options.max_evaluations; ++r) {
    const double before = result.value;
    result.converged = descend(counted, box, result.x, result.value, options);
    if (before - result.value <= options.f_tolerance * (1.0 + std::abs(before))) break;
  }
  result.evaluations = counted.count;
  return result;
}

OptimizeResult differential_evolution(const Objective& f, const Box& box,
                                      const DifferentialEvolutionOptions& options) {
  box.validate();
  const std::size_t dim = box.dim();
  const std::size_t np = std::max<std::size_t>(4, options.population_per_dim * dim);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Counted counted{f};

  std::vector<std::vector<double>> pop(np, std::vector<double>(dim));
  std::vector<double> values(np);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < dim; ++j)
      pop[i][j] = box.lower[j] + unit(rng) * (box.upper[j] - box.lower[j]);
    if (i == 0 && options.initial.size() == dim) pop[0] = box.clamp(options.initial);
    values[i] = counted(pop[i]);
  }

  std::uniform_int_distribution<std::size_t> pick(0, np - 1);
  std::uniform_int_distribution<std::size_t> pick_dim(0, dim - 1);
  std::size_t best = static_cast<std::size_t>(
      std::min_element(values.begin(), values.end()) - values.begin());
  std::size_t stall = 0;
  bool converged = false;
  std::vector<double> trial(dim);

  while (counted.count + np <= options.max_evaluations) {
    const double best_before = values[best];
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t a, b, c;
      do a = pick(rng); while (a == i);
      do b = pick(rng); while (b == i || b == a);
      do c = pick(rng); while (c == i || c == a || c == b);
      const std::size_t forced = pick_dim(rng);
      for (std::size_t j = 0; j < dim; ++j) {
        if (j == forced || unit(rng) < options.crossover) {
          double v = pop[a][j] + options.mutation * (pop[b][j] - pop[c][j]);
          // Out-of-box mutants are resampled between the parent and the bound.
          if (v < box.lower[j]) v = box.lower[j] + unit(rng) * (pop[i][j] - box.lower[j]);
          if (v > box.upper[j]) v = box.upper[j] - unit(rng) * (box.upper[j] - pop[i][j]);
          trial[j] = v;
        } else {
          trial[j] = pop[i][j];
        }
      }
      const double ft = counted(trial);
      if (ft <= values[i]) {
        pop[i] = trial;
        values[i] = ft;
        if (ft < values[best]) best = i;
      }
    }
    if (values[best] < best_before) {
      stall = 0;
    } else if (++stall >= options.stall_generations) {
      converged = true;
      break;
    }
  }

  OptimizeResult result;
  result.x = pop[best];
  result.value = values[best];
  result.evaluations = counted.count;
  result.converged = converged;
  return result;
}

OptimizeResult minimize_in_box(const Objective& f, const Box& box, const GlobalOptions& options) {
  const auto global = differential_evolution(f, box, options.global);
  auto local = nelder_mead(f, global.x, box, options.local);
  local.evaluations += global.evaluations;
  if (global.value < local.value) {
    local.x = global.x;
    local.value = global.value;
  }
  return local;
}

}  // namespace geocal
