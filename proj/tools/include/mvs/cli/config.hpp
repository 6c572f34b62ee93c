#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvs/hjb_solver.hpp"
#include "mvs/market.hpp"
#include "mvs/simcheck.hpp"

namespace mvs::cli {

/// Raised for anything wrong with the configuration file, including market
/// parameters rejected by build_market. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MarketSection {
  double horizon = 5.0;
  double risk_free = 0.05;
  std::vector<double> mu{0.15};
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(1, 1, 0.25);
};

struct SolverSection {
  std::size_t num_steps = 2000;
  double picard_tol = 1e-10;
  std::size_t picard_max_iter = 500;
  double eps_den = 1e-12;
  std::vector<ModelVariant> variants{ModelVariant::Full};
};

struct SweepAxis {
  std::string param;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 1;

  std::vector<double> values() const;
};

struct SweepSection {
  std::optional<SweepAxis> first;
  std::optional<SweepAxis> second;
  std::string preset;  // empty or "figures"
};

struct RunConfig {
  MarketSection market;
  Preferences prefs;
  SolverSection solver;
  SimConfig simulation;
  SweepSection sweep;

  MarketSpec market_spec() const;
  SolverOptions solver_options() const { return {solver.eps_den}; }
  PicardOptions picard_options() const { return {solver.picard_tol, solver.picard_max_iter, solver.eps_den}; }
};

/// Parameters a sweep axis may vary. mu and sigma require a single asset.
inline constexpr const char* kSweepParams[] = {"xi", "gamma0", "phi0", "mu", "sigma", "r", "T", "w0"};

/// Sets one sweepable parameter. Throws ConfigError for unknown names.
void apply_param(RunConfig& cfg, const std::string& name, double value);

/// Strict parse: unknown sections or keys, duplicate keys, malformed numbers
/// and values outside module preconditions are all ConfigError.
RunConfig parse_config(std::istream& in, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

/// Canonical text form of a resolved config; parse_config round-trips it.
std::string render_config(const RunConfig& cfg);

/// 17 significant digits, independent of the global locale.
std::string format_double(double v);

}  // namespace mvs::cli
