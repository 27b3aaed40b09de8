#include "geocal/forward_model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "csv.hpp"

namespace geocal {

std::vector<double> ForwardModel::predict_log10(std::span<const double> theta,
                                                const std::vector<Location>& sites) const {
  auto out = predict(theta, sites);
  for (double& v : out) v = std::log10(v);
  return out;
}

ConstantMeanModel::ConstantMeanModel(double lower, double upper) : box_{{lower}, {upper}} {
  box_.validate();
}

ConstantMeanModel ConstantMeanModel::spanning(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("constant mean: no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double margin = std::max(1.0, 0.1 * (*hi - *lo));
  return ConstantMeanModel(*lo - margin, *hi + margin);
}

std::vector<double> ConstantMeanModel::predict(std::span<const double> theta,
                                               const std::vector<Location>& sites) const {
  if (theta.size() != 1) throw std::invalid_argument("constant mean: expects one parameter");
  return std::vector<double>(sites.size(), theta[0]);
}

ToyPlumeModel::ToyPlumeModel(Location source, Box bounds) : source_(source), box_(std::move(bounds)) {
  box_.validate();
  if (box_.dim() != 5) throw std::invalid_argument("toy plume: bounds must have 5 entries");
  if (!(box_.lower[0] > 0.0) || !(box_.lower[3] > 0.0) || !(box_.lower[4] >= 1.0))
    throw std::invalid_argument("toy plume: mass and spread bounds must be positive, elongation >= 1");
}

Box ToyPlumeModel::default_bounds() {
  return {{1.0, -20.0, -20.0, 1.0, 1.0}, {1000.0, 20.0, 20.0, 30.0, 4.0}};
}

void ToyPlumeModel::check(std::span<const double> theta) const {
  if (theta.size() != 5) throw std::invalid_argument("toy plume: expects 5 parameters");
  if (!(theta[0] > 0.0)) throw std::invalid_argument("toy plume: mass must be positive");
  if (!(theta[3] > 0.0)) throw std::invalid_argument("toy plume: spread must be positive");
  if (!(theta[4] >= 1.0)) throw std::invalid_argument("toy plume: elongation must be >= 1");
}

std::vector<double> ToyPlumeModel::predict(std::span<const double> theta,
                                           const std::vector<Location>& sites) const {
  check(theta);
  const double mass = theta[0], u = theta[1], v = theta[2], rho = theta[3], alpha = theta[4];
  const double peak = mass / (2.0 * std::numbers::pi * rho * rho * alpha);
  std::vector<double> out(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const double dx = (sites[i].x - source_.x - u) / (rho * alpha);
    const double dy = (sites[i].y - source_.y - v) / rho;
    out[i] = peak * std::exp(-0.5 * (dx * dx + dy * dy));
  }
  return out;
}

std::vector<double> ToyPlumeModel::predict_log10(std::span<const double> theta,
                                                 const std::vector<Location>& sites) const {
  check(theta);
  const double mass = theta[0], u = theta[1], v = theta[2], rho = theta[3], alpha = theta[4];
  const double log_peak = std::log10(mass / (2.0 * std::numbers::pi * rho * rho * alpha));
  std::vector<double> out(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const double dx = (sites[i].x - source_.x - u) / (rho * alpha);
    const double dy = (sites[i].y - source_.y - v) / rho;
    out[i] = log_peak - 0.5 * (dx * dx + dy * dy) * std::numbers::log10e;
  }
  return out;
}

ExternalModel::ExternalModel(std::string command_template, std::vector<std::string> parameter_names,
                             Box bounds)
    : command_(std::move(command_template)), names_(std::move(parameter_names)), box_(std::move(bounds)) {
  box_.validate();
  if (names_.size() != box_.dim())
    throw std::invalid_argument("external model: parameter names and bounds differ in length");
  if (command_.empty()) throw std::invalid_argument("external model: empty command template");
}

void write_parameter_file(const std::filesystem::path& path, const std::vector<std::string>& names,
                          std::span<const double> theta) {
  if (names.size() != theta.size())
    throw std::invalid_argument("parameter file: names and values differ in length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write parameter file " + path.string());
  for (std::size_t i = 0; i < names.size(); ++i)
    out << names[i] << '=' << detail::format_double(theta[i]) << '\n';
}

std::vector<std::pair<std::string, double>> read_parameter_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open parameter file " + path.string());
  std::vector<std::pair<std::string, double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    double v = 0.0;
    if (eq == std::string_view::npos || !detail::parse_double(trimmed.substr(eq + 1), v))
      throw InputError("parameter file line " + std::to_string(line_no) + ": expected name=value");
    out.emplace_back(std::string(detail::trim(trimmed.substr(0, eq))), v);
  }
  return out;
}

namespace {

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
    text.replace(pos, key.size(), value);
  return text;
}

std::string quote(const std::filesystem::path& p) {
  std::string out = "'";
  for (char c : p.string()) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

std::filesystem::path make_call_directory() {
  static std::atomic<std::uint64_t> counter{0};
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const auto base = std::filesystem::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    const auto dir = base / ("geocal-ext-" + std::to_string(::getpid()) + "-" +
                             std::to_string(counter++) + "-" + std::to_string(rng() % 1000000));
    if (std::filesystem::create_directory(dir)) return dir;
  }
  throw ExternalModelError("external model: cannot create a temporary directory");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct DirectoryGuard {
  std::filesystem::path dir;
  ~DirectoryGuard() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }
};

}  // namespace

std::vector<double> ExternalModel::predict(std::span<const double> theta,
                                           const std::vector<Location>& sites) const {
  if (theta.size() != names_.size())
    throw std::invalid_argument("external model: wrong parameter count");
  const DirectoryGuard guard{make_call_directory()};
  const auto params = guard.dir / "params.txt";
  const auto sites_file = guard.dir / "sites.csv";
  const auto out_file = guard.dir / "out.csv";
  const auto log_file = guard.dir / "log.txt";
  write_parameter_file(params, names_, theta);
  save_locations(sites_file, sites);

  std::string cmd = replace_all(command_, "{params}", quote(params));
  cmd = replace_all(cmd, "{sites}", quote(sites_file));
  cmd = replace_all(cmd, "{out}", quote(out_file));
  const int status = std::system(("(" + cmd + ") > " + quote(log_file) + " 2>&1").c_str());
  const std::string captured = slurp(log_file);
  if (status != 0)
    throw ExternalModelError("external model: command exited with status " + std::to_string(status) +
                             "\n" + captured);

  std::ifstream in(out_file);
  if (!in) throw ExternalModelError("external model: no output file written\n" + captured);
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cell = detail::trim(line);
    if (cell.empty()) continue;
    double v = 0.0;
    if (!detail::parse_double(cell, v))
      throw ExternalModelError("external model: output line " + std::to_string(line_no) +
                               " is not numeric: '" + std::string(cell) + "'\n" + captured);
    values.push_back(v);
  }
  if (values.size() != sites.size())
    throw ExternalModelError("external model: expected " + std::to_string(sites.size()) +
                             " output rows, got " + std::to_string(values.size()) + "\n" + captured);
  return values;
}

namespace {

Box bounds_from_json(const nlohmann::json& j, const std::vector<std::string>& names, Box defaults) {
  if (j.is_null()) return defaults;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!j.contains(names[i])) continue;
    const auto& b = j.at(names[i]);
    defaults.lower[i] = b.at(0).get<double>();
    defaults.upper[i] = b.at(1).get<double>();
  }
  return defaults;
}

}  // namespace

std::unique_ptr<ForwardModel> make_forward_model(const nlohmann::json& spec,
                                                 std::span<const double> values) {
  const auto kind = spec.at("model").get<std::string>();
  if (kind == "toy_plume") {
    Location source{25.0, 25.0};
    if (spec.contains("source"))
      source = {spec["source"].at(0).get<double>(), spec["source"].at(1).get<double>()};
    const ToyPlumeModel probe(source);
    return std::make_unique<ToyPlumeModel>(
        source, bounds_from_json(spec.value("bounds", nlohmann::json()), probe.parameter_names(),
                                 ToyPlumeModel::default_bounds()));
  }
  if (kind == "constant_mean") {
    if (spec.contains("bounds"))
      return std::make_unique<ConstantMeanModel>(spec["bounds"].at(0).get<double>(),
                                                 spec["bounds"].at(1).get<double>());
    return std::make_unique<ConstantMeanModel>(ConstantMeanModel::spanning(values));
  }
  if (kind == "external") {
    std::vector<std::string> names;
    Box box;
    for (const auto& p : spec.at("parameters")) {
      names.push_back(p.at("name").get<std::string>());
      box.lower.push_back(p.at("lower").get<double>());
      box.upper.push_back(p.at("upper").get<double>());
    }
    return std::make_unique<ExternalModel>(spec.at("command").get<std::string>(), std::move(names),
                                           std::move(box));
  }
  throw std::invalid_argument("unknown forward model '" + kind + "'");
}

}  // namespace geocal
