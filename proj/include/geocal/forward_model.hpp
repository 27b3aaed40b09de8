#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "geocal/optimize.hpp"
#include "geocal/spatial.hpp"

namespace geocal {

/// Deterministic map from a bounded parameter vector to predictions at sites.
/// Implementations must be reentrant: `predict` may be called concurrently.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;

  virtual std::string name() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual Box bounds() const = 0;
  virtual std::vector<double> predict(std::span<const double> theta,
                                      const std::vector<Location>& sites) const = 0;
  /// log10 of the predictions; models with positive outputs may override
  /// with an analytic form that does not underflow.
  virtual std::vector<double> predict_log10(std::span<const double> theta,
                                            const std::vector<Location>& sites) const;

  std::size_t dimension() const { return parameter_names().size(); }
};

/// A spatially constant surface: predict(theta) = theta[0] everywhere.
class ConstantMeanModel final : public ForwardModel {
 public:
  ConstantMeanModel(double lower, double upper);
  /// Bounds spanning the observed values with a margin.
  static ConstantMeanModel spanning(std::span<const double> values);

  std::string name() const override { return "constant_mean"; }
  std::vector<std::string> parameter_names() const override { return {"mean"}; }
  Box bounds() const override { return box_; }
  std::vector<double> predict(std::span<const double> theta,
                              const std::vector<Location>& sites) const override;

 private:
  Box box_;
};

/// Elongated Gaussian deposit around a source:
///   load(x, y) = M / (2 pi rho^2 alpha) exp(-1/2 [((x - cx - u) / (rho alpha))^2 + ((y - cy - v) / rho)^2])
/// with theta = (mass M, offset u, offset v, spread rho, elongation alpha >= 1).
class ToyPlumeModel final : public ForwardModel {
 public:
  explicit ToyPlumeModel(Location source = {25.0, 25.0}, Box bounds = default_bounds());
  static Box default_bounds();

  std::string name() const override { return "toy_plume"; }
  std::vector<std::string> parameter_names() const override {
    return {"mass", "offset_x", "offset_y", "spread", "elongation"};
  }
  Box bounds() const override { return box_; }
  std::vector<double> predict(std::span<const double> theta,
                              const std::vector<Location>& sites) const override;
  std::vector<double> predict_log10(std::span<const double> theta,
                                    const std::vector<Location>& sites) const override;
  const Location& source() const { return source_; }

 private:
  void check(std::span<const double> theta) const;

  Location source_;
  Box box_;
};

class ExternalModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs an external program per prediction. The command template may contain
/// `{params}` (a `name=value` file), `{sites}` (a `x_km,y_km` CSV) and `{out}`
/// (where the program writes one predicted value per line, in site order).
/// Every call works in its own temporary directory.
class ExternalModel final : public ForwardModel {
 public:
  ExternalModel(std::string command_template, std::vector<std::string> parameter_names, Box bounds);

  std::string name() const override { return "external"; }
  std::vector<std::string> parameter_names() const override { return names_; }
  Box bounds() const override { return box_; }
  std::vector<double> predict(std::span<const double> theta,
                              const std::vector<Location>& sites) const override;

 private:
  std::string command_;
  std::vector<std::string> names_;
  Box box_;
};

/// Parameter file helpers shared with the `predict` CLI subcommand.
void write_parameter_file(const std::filesystem::path& path, const std::vector<std::string>& names,
                          std::span<const double> theta);
std::vector<std::pair<std::string, double>> read_parameter_file(const std::filesystem::path& path);

/// Builds a model from a JSON spec:
///   {"model": "toy_plume", "source": [25, 25], "bounds": {"mass": [lo, hi], ...}}
///   {"model": "constant_mean", "bounds": [lo, hi]}            (bounds optional)
///   {"model": "external", "command": "...", "parameters": [{"name": .., "lower": .., "upper": ..}]}
/// `values` supplies data-driven defaults (constant_mean bounds).
std::unique_ptr<ForwardModel> make_forward_model(const nlohmann::json& spec,
                                                 std::span<const double> values = {});

}  // namespace geocal
