#include "mvs/policy.hpp"

#include <cmath>
#include <span>
#include <string>

#include "mvs/numerics.hpp"

namespace mvs {

namespace {

void check_wealth(double w) {
  if (!(w > 0.0) || !std::isfinite(w)) {
    throw Error(ErrorCode::NonPositiveWealth, "wealth must be positive, got " + std::to_string(w));
  }
}

void check_table_time(const TimeGrid& grid, double t) {
  if (!(t >= 0.0) || t > grid.horizon()) {
    throw Error(ErrorCode::OutOfHorizon,
                "t=" + std::to_string(t) + " outside [0, " + std::to_string(grid.horizon()) + "]");
  }
}

double interp(const TimeGrid& grid, std::span<const double> values, double t) {
  const std::size_t i = grid.node_index(t);
  if (i < values.size()) return values[i];
  return numerics::cubic_interpolate(values, grid.dt(), t);
}

}  // namespace

CoefficientPoint coefficients_at(const CoefficientTable& table, double t) {
  check_table_time(table.grid, t);
  if (table.size() != table.grid.size()) throw Error(ErrorCode::UnsolvedTable, "coefficient table is empty");
  const TimeGrid& g = table.grid;
  return {interp(g, table.f, t),  interp(g, table.h1, t), interp(g, table.h2, t),
          interp(g, table.h3, t), interp(g, table.g1, t), interp(g, table.k1, t)};
}

PolicyPoint equilibrium_policy(const CoefficientTable& table, const MarketCurves& market, double t, double w) {
  check_wealth(w);
  if (!(market.grid() == table.grid)) {
    throw Error(ErrorCode::UnsolvedTable, "table grid does not match the market grid");
  }
  const MarketSnapshot snap = market.snapshot(t);
  const CoefficientPoint c = coefficients_at(table, t);
  const Preferences& p = table.effective;

  PolicyPoint out;
  out.time = t;
  out.wealth = w;
  out.f = c.f;
  out.allocation = (w / (p.xi + 1.0) * c.f) * snap.risk_direction;
  out.distortion = (-p.xi / (p.xi + 1.0)) * snap.distortion_direction;

  // First-order aggregate from the ansatz derivatives h_w, h_y, h_yy, g, k.
  const double h_w = c.h1 - p.gamma0 * c.h2 + p.phi0 * c.h3;
  const double g_term = (p.gamma0 * c.g1 + 2.0 * p.phi0 * c.g1 * c.g1) * c.g1;
  out.delta1 = h_w + g_term - p.phi0 * c.k1 * c.g1 - 2.0 * p.phi0 * c.g1 * c.k1;
  out.delta3 = ratio_denominator(c.h2, c.h3, c.g1, c.k1, p.gamma0, p.phi0);
  out.delta2 = (-p.gamma0 * c.h2 + 2.0 * p.phi0 * c.h3 - 2.0 * p.phi0 * c.g1 * c.k1) / w;
  out.ambiguity_pref = -out.delta2 / (out.delta1 * out.delta1);
  return out;
}

double value_coefficient(double h1, double h2, double h3, double g1, double gamma0, double phi0) noexcept {
  return h1 - 0.5 * gamma0 * (h2 - g1 * g1) + phi0 / 3.0 * (2.0 * g1 * g1 * g1 - 3.0 * g1 * h2 + h3);
}

TableSet solve_all(const MarketCurves& market, const Preferences& prefs, const SolverOptions& options) {
  TableSet set;
  set.full = solve_system(market, prefs, ModelVariant::Full, options);
  set.neutral = solve_system(market, prefs, ModelVariant::AmbiguityNeutral, options);
  set.noskew = solve_system(market, prefs, ModelVariant::NoSkew, options);
  set.basic = solve_system(market, prefs, ModelVariant::Basic, options);
  set.ignore_uncertainty = solve_mispec_system(market, prefs, MispecKind::IgnoreUncertainty, options);
  set.ignore_both = solve_mispec_system(market, prefs, MispecKind::IgnoreBoth, options);
  return set;
}

namespace {

double table_value(const CoefficientTable& table, double t, double w) {
  const CoefficientPoint c = coefficients_at(table, t);
  return w * value_coefficient(c.h1, c.h2, c.h3, c.g1, table.effective.gamma0, table.effective.phi0);
}

double table_value(const MispecTable& table, double t, double w) {
  check_table_time(table.grid, t);
  if (table.size() != table.grid.size()) throw Error(ErrorCode::UnsolvedTable, "misspecified table is empty");
  const TimeGrid& g = table.grid;
  return w * value_coefficient(interp(g, table.a1, t), interp(g, table.a2, t), interp(g, table.a3, t),
                               interp(g, table.b1, t), table.effective.gamma0, table.effective.phi0);
}

}  // namespace

ValueReport value_at(const TableSet& tables, double t, double w) {
  check_wealth(w);
  const TimeGrid& grid = tables.full.grid;
  for (const TimeGrid* other : {&tables.neutral.grid, &tables.noskew.grid, &tables.basic.grid,
                                &tables.ignore_uncertainty.grid, &tables.ignore_both.grid}) {
    if (!(*other == grid)) throw Error(ErrorCode::UnsolvedTable, "tables were solved on different grids");
  }
  ValueReport r;
  r.time = t;
  r.wealth = w;
  r.value_full = table_value(tables.full, t, w);
  r.value_neutral = table_value(tables.neutral, t, w);
  r.value_noskew = table_value(tables.noskew, t, w);
  r.value_basic = table_value(tables.basic, t, w);
  r.value_mispec_u = table_value(tables.ignore_uncertainty, t, w);
  r.value_mispec_both = table_value(tables.ignore_both, t, w);
  if (r.value_full == 0.0) {
    throw Error(ErrorCode::ZeroDenominatorValue, "V(t,w) is zero at t=" + std::to_string(t));
  }
  r.loss_skew = 1.0 - r.value_noskew / r.value_full;
  r.loss_uncertainty = 1.0 - r.value_mispec_u / r.value_full;
  r.loss_both = 1.0 - r.value_mispec_both / r.value_full;
  return r;
}

Delta3Report delta3_scan(const CoefficientTable& table) {
  Delta3Report report;
  if (table.delta3.empty()) return report;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < table.delta3.size(); ++i) {
    if (table.delta3[i] < table.delta3[arg]) arg = i;
  }
  report.min_value = table.delta3[arg];
  report.argmin_time = table.grid.node(arg);
  report.all_positive = report.min_value > 0.0;
  return report;
}

}  // namespace mvs
