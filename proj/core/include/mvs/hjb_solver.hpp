#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "mvs/market.hpp"

namespace mvs {

/// Which equilibrium problem a coefficient table solves.
///   Full             robust mean-variance-skewness investor
///   AmbiguityNeutral xi = 0 (no distortion, no penalty)
///   NoSkew           phi0 = 0 (robust mean-variance)
///   Basic            xi = 0 and phi0 = 0
enum class ModelVariant { Full, AmbiguityNeutral, NoSkew, Basic };

std::string_view to_string(ModelVariant variant) noexcept;
/// Accepts the enumerator names, case-sensitive. Throws InvalidArgument.
ModelVariant parse_variant(std::string_view name);

/// Preferences after the variant's reduction has been applied.
Preferences effective_preferences(const Preferences& prefs, ModelVariant variant) noexcept;

struct SolverOptions {
  /// Smallest admissible value of the ratio denominator delta3.
  double eps_den = 1e-12;
};

struct PicardOptions {
  double tol = 1e-10;
  std::size_t max_iter = 500;
  double eps_den = 1e-12;
};

/// Grid functions of the separable ansatz
///   h(t,w,y) = h1 w - gamma0/(2y) h2 w^2 + phi0/(3y^2) h3 w^3,
///   g(t,w) = g1 w,  k(t,w) = k1 w^2,
/// together with the strategy ratio f = delta1/delta3.
///
/// All five coefficient arrays are always stored. For AmbiguityNeutral the
/// solver produces g1 == h1 and k1 == h2 exactly; for NoSkew and Basic h3 is
/// carried along but does not enter f or the value.
struct CoefficientTable {
  ModelVariant variant = ModelVariant::Full;
  TimeGrid grid{1.0, 1};
  Preferences prefs;      // as supplied
  Preferences effective;  // after the variant reduction
  std::vector<double> f, h1, h2, h3, g1, k1, delta3;

  std::size_t size() const noexcept { return f.size(); }
};

enum class MispecKind { IgnoreUncertainty, IgnoreBoth };

std::string_view to_string(MispecKind kind) noexcept;

/// Value system of an ambiguity-averse investor who follows a strategy solved
/// for a simpler model: the ambiguity-neutral strategy (IgnoreUncertainty) or
/// the ambiguity-neutral mean-variance strategy (IgnoreBoth). Nature still
/// distorts the measure against the pre-specified strategy.
///
/// For IgnoreBoth the skewness weight is zero, so a3 and c1 are auxiliary.
struct MispecTable {
  MispecKind kind = MispecKind::IgnoreUncertainty;
  TimeGrid grid{1.0, 1};
  Preferences prefs;      // as supplied
  Preferences effective;  // phi0 = 0 for IgnoreBoth
  std::vector<double> driver_f;
  std::vector<double> a, a1, a2, a3, b1, c1, delta3;

  std::size_t size() const noexcept { return a.size(); }
};

/// f = [h1 + gamma0 (g1^2 - h2) + phi0 (h3 + 2 g1^3 - 3 g1 k1)] / delta3.
double strategy_ratio(double h1, double h2, double h3, double g1, double k1, double gamma0, double phi0) noexcept;
/// delta3 = gamma0 h2 + 2 phi0 (g1 k1 - h3).
double ratio_denominator(double h2, double h3, double g1, double k1, double gamma0, double phi0) noexcept;

/// Integrates the coefficient system backward from T with classical RK4,
/// evaluating f algebraically from the state inside every stage.
///
/// Throws DegenerateDenominator when delta3 drops to eps_den or below at any
/// stage (for true solutions delta3 stays positive, so a sign change means the
/// solution has blown up), NonFiniteState when a state overflows.
CoefficientTable solve_system(const MarketCurves& market, const Preferences& prefs, ModelVariant variant,
                              const SolverOptions& options = {});

struct PicardResult {
  std::vector<double> f;
  std::size_t iterations = 0;
  double final_change = 0.0;
  bool damped = false;
};

/// Fixed-point iteration on the integral equation for f (Full semantics),
/// with trapezoidal quadrature on the market grid. Starts from
/// exp(-int_t^T r)/gamma0 and halves the update once successive changes grow.
/// Throws NoConvergence, DegenerateDenominator or NonFiniteState.
PicardResult solve_f_picard(const MarketCurves& market, const Preferences& prefs, const PicardOptions& options = {});

/// Solves the driver system (AmbiguityNeutral or Basic) jointly with the
/// misspecified value system so the driver ratio is exact at RK4 stages.
MispecTable solve_mispec_system(const MarketCurves& market, const Preferences& prefs, MispecKind kind,
                                const SolverOptions& options = {});

/// g1, h2, h3 and h1 rebuilt from their exponential closed forms using the
/// table's f, trapezoidal quadrature on the table grid.
struct ClosedFormCoefficients {
  std::vector<double> h1, h2, h3, g1;
};

ClosedFormCoefficients closed_form_coefficients(const MarketCurves& market, const CoefficientTable& table);

}  // namespace mvs
