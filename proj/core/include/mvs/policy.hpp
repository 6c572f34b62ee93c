#pragma once

#include <Eigen/Dense>

#include <cstddef>

#include "mvs/hjb_solver.hpp"
#include "mvs/market.hpp"

namespace mvs {

/// Equilibrium control and distortion at one (t, w), with the sensitivity
/// aggregates that define the ambiguity preference function.
struct PolicyPoint {
  double time = 0.0;
  double wealth = 0.0;
  Eigen::VectorXd allocation;  // money amount per risky asset
  Eigen::VectorXd distortion;  // Girsanov drift adjustment
  double f = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  double ambiguity_pref = 0.0;  // Phi = -delta2 / delta1^2
};

/// Coefficient arrays interpolated to an arbitrary time.
struct CoefficientPoint {
  double f, h1, h2, h3, g1, k1;
};

CoefficientPoint coefficients_at(const CoefficientTable& table, double t);

/// u* = w/(xi+1) Sigma^{-1} beta f(t), q* = -xi/(xi+1) sigma' Sigma^{-1} beta.
/// The variant's effective xi is used, so AmbiguityNeutral and Basic tables
/// return a zero distortion. Off-node times use cubic interpolation.
/// Throws NonPositiveWealth, OutOfHorizon, UnsolvedTable.
PolicyPoint equilibrium_policy(const CoefficientTable& table, const MarketCurves& market, double t, double w);

/// V/w = h1 - gamma0/2 (h2 - g1^2) + phi0/3 (2 g1^3 - 3 g1 h2 + h3).
double value_coefficient(double h1, double h2, double h3, double g1, double gamma0, double phi0) noexcept;

/// All tables needed for the value report, solved on one market grid.
struct TableSet {
  CoefficientTable full, neutral, noskew, basic;
  MispecTable ignore_uncertainty, ignore_both;
};

TableSet solve_all(const MarketCurves& market, const Preferences& prefs, const SolverOptions& options = {});

struct ValueReport {
  double time = 0.0;
  double wealth = 0.0;
  double value_full = 0.0;
  double value_neutral = 0.0;
  double value_noskew = 0.0;
  double value_basic = 0.0;
  double value_mispec_u = 0.0;
  double value_mispec_both = 0.0;
  double loss_skew = 0.0;         // 1 - V^/V
  double loss_uncertainty = 0.0;  // 1 - V1/V
  double loss_both = 0.0;         // 1 - V2/V
};

/// Throws NonPositiveWealth, OutOfHorizon, UnsolvedTable (grids differ),
/// ZeroDenominatorValue when V(t,w) == 0.
ValueReport value_at(const TableSet& tables, double t, double w);

struct Delta3Report {
  double min_value = 0.0;
  double argmin_time = 0.0;
  bool all_positive = false;
};

Delta3Report delta3_scan(const CoefficientTable& table);

}  // namespace mvs
