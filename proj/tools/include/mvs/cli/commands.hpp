#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvs/cli/config.hpp"

namespace mvs::cli {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfigError = 2, kExitSolverError = 3 };

/// Columns t,f,h1,h2,h3,g1,k1,delta3, one row per grid node.
std::string coefficients_csv(const CoefficientTable& table);

struct SweepSpec {
  std::string name;
  RunConfig base;
  SweepAxis first;
  std::optional<SweepAxis> second;
};

/// One evaluated sweep cell. values follow sweep_value_columns(); entries a
/// failed stage could not produce are NaN and status names the first error.
struct SweepRow {
  std::vector<double> params;
  std::string status = "ok";
  std::vector<double> values;
};

std::vector<std::string> sweep_value_columns(std::size_t num_assets);
/// Index of a named value column; throws std::out_of_range.
std::size_t sweep_column(std::size_t num_assets, const std::string& name);

SweepRow evaluate_cell(const RunConfig& cfg, std::vector<double> params);
/// Cells are evaluated on `workers` threads and returned in grid order
/// (first axis outer), so the output does not depend on the worker count.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::size_t workers);
std::string sweep_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows);

/// The figure reproduction sweeps, built on top of `base`.
std::vector<SweepSpec> figure_presets(const RunConfig& base);

struct CheckOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Oracle checks for the configured parameters. Solver failures propagate
/// as mvs::Error.
std::vector<CheckOutcome> run_checks(const RunConfig& cfg);

/// Monte Carlo summary with analytic comparisons, for the Full table.
std::string simulation_csv(const RunConfig& cfg, std::size_t workers);

/// Text of run.meta for a command.
std::string run_meta(const std::string& command, const RunConfig& cfg);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mvs::cli
