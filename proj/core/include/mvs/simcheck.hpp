#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mvs/hjb_solver.hpp"
#include "mvs/market.hpp"

namespace mvs {

/// Philox4x32-10 counter-based generator.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key) noexcept;

/// Two independent standard normals for (seed, path, pair) via Box-Muller.
std::array<double, 2> path_normal_pair(std::uint64_t seed, std::uint64_t path, std::uint64_t pair) noexcept;
/// Standard normal for (seed, path, step), a pure function of its arguments.
double path_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step) noexcept;

enum class Scheme { ExactLognormal, EulerMaruyama };
enum class Measure { Reference, Distorted };

std::string_view to_string(Scheme scheme) noexcept;
std::string_view to_string(Measure measure) noexcept;
Scheme parse_scheme(std::string_view name);
Measure parse_measure(std::string_view name);

struct SimConfig {
  std::size_t num_paths = 100000;
  std::uint64_t seed = 42;
  double start_time = 0.0;  // must be a grid node
  double start_wealth = 4.0;
  Scheme scheme = Scheme::ExactLognormal;
  Measure measure = Measure::Distorted;
  /// Euler steps per grid step.
  std::size_t euler_substeps = 2;
  /// 0 picks MVS_ROBUST_THREADS or the hardware concurrency.
  std::size_t workers = 0;

  void validate() const;
};

/// Worker count from MVS_ROBUST_THREADS, else std::thread::hardware_concurrency.
std::size_t default_workers();

/// Equilibrium wealth as a GBM on the grid: dW = W (drift dt + sqrt(vol_sq) dB).
/// penalty_rate times E[W_s] is the density of the ambiguity penalty.
struct WealthLaw {
  TimeGrid grid{1.0, 1};
  double gamma0 = 0.0;
  double phi0 = 0.0;
  double xi = 0.0;
  std::vector<double> drift_distorted, drift_reference, vol_sq, penalty_rate, delta3;

  const std::vector<double>& drift(Measure m) const {
    return m == Measure::Distorted ? drift_distorted : drift_reference;
  }
};

/// Throws UnsolvedTable when the table grid differs from the market grid.
WealthLaw wealth_law(const CoefficientTable& table, const MarketCurves& market);
/// Wealth under the pre-specified strategy with nature's best response.
WealthLaw wealth_law(const MispecTable& table, const MarketCurves& market);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct SimResult {
  std::size_t num_paths = 0;
  std::array<Estimate, 4> raw_moments{};  // E[W_T^n], n = 1..4
  double variance = 0.0;
  double third_central = 0.0;
  double sup_fourth_moment = 0.0;
  double min_wealth = 0.0;
  Estimate penalty{};    // Distorted measure only, NaN otherwise
  Estimate objective{};  // Distorted measure only, NaN otherwise
};

SimResult simulate_equilibrium_wealth(const WealthLaw& law, const SimConfig& cfg);
SimResult simulate_equilibrium_wealth(const CoefficientTable& table, const MarketCurves& market,
                                      const SimConfig& cfg);

/// E[W_T^n | W_t = w] = w^n exp(int_t^T (n drift + n(n-1)/2 vol_sq) ds), trapezoid.
double lognormal_moment(const WealthLaw& law, Measure measure, double t, double w, int order);
double lognormal_moments(const CoefficientTable& table, const MarketCurves& market, double t, double w, int order);

struct ValueVerification {
  double value = 0.0;            // coefficient formula times w
  double analytic_objective = 0.0;
  double analytic_penalty = 0.0;
  double analytic_rel_error = 0.0;
  bool analytic_pass = false;
  std::optional<SimResult> mc;
  double mc_z = 0.0;  // (objective - value) / SE
  bool mc_pass = false;
};

/// Recomposes the objective from lognormal moments and the penalty quadrature
/// and compares it with the value function. With mispec set, the check is
/// made for the misspecified value system instead. Monte Carlo runs when
/// cfg.num_paths > 0. Throws PenaltyUndefined if delta3 <= 0 on [t, T].
ValueVerification verify_value(const CoefficientTable& table, const MispecTable* mispec, const MarketCurves& market,
                               double t, double w, const SimConfig& cfg, double rel_tol = 1e-6);

struct MomentBoundReport {
  double analytic_sup = 0.0;
  double analytic_argmax_time = 0.0;
  double mc_sup = 0.0;
  double ratio = 0.0;
  bool finite = false;
  bool consistent = false;
};

MomentBoundReport moment_bound_check(const CoefficientTable& table, const MarketCurves& market, const SimConfig& cfg);

}  // namespace mvs
