#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "mvs/error.hpp"

namespace mvs {

/// Uniform time grid on [0, T] with N steps. nodes()[0] == 0 and
/// nodes()[N] == T exactly.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t num_steps);

  double horizon() const noexcept { return horizon_; }
  std::size_t num_steps() const noexcept { return nodes_.size() - 1; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double dt() const noexcept { return dt_; }
  double node(std::size_t i) const { return nodes_[i]; }
  std::span<const double> nodes() const noexcept { return nodes_; }

  /// Index of the node equal to t, or size() when t is not a node.
  std::size_t node_index(double t) const noexcept;

  bool operator==(const TimeGrid& other) const noexcept {
    return horizon_ == other.horizon_ && nodes_.size() == other.nodes_.size();
  }

 private:
  double horizon_;
  double dt_;
  std::vector<double> nodes_;
};

/// Piecewise-linear curve through (time, value) knots, flat outside the knot
/// range. A single knot is a constant curve.
template <class Value>
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  explicit PiecewiseLinear(Value constant) : times_{0.0}, values_{std::move(constant)} {}
  PiecewiseLinear(std::vector<double> times, std::vector<Value> values);

  Value operator()(double t) const;

  std::span<const double> knots() const noexcept { return times_; }
  std::span<const Value> values() const noexcept { return values_; }
  bool is_constant() const noexcept { return values_.size() == 1; }

 private:
  std::vector<double> times_;
  std::vector<Value> values_;
};

using ScalarCurve = PiecewiseLinear<double>;
using VectorCurve = PiecewiseLinear<Eigen::VectorXd>;
using MatrixCurve = PiecewiseLinear<Eigen::MatrixXd>;

/// Input to build_market. Volatility rows are per-asset volatility vectors.
struct MarketSpec {
  double horizon = 5.0;
  std::size_t num_steps = 2000;
  ScalarCurve risk_free{0.05};
  VectorCurve drift;
  MatrixCurve volatility;

  /// Constant-coefficient market, the common case.
  static MarketSpec constant(double horizon, std::size_t num_steps, double r,
                             const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma);
  /// Single risky asset with constant coefficients.
  static MarketSpec single_asset(double horizon, std::size_t num_steps, double r, double mu,
                                 double sigma);
};

/// Everything the equilibrium formulas need at one instant.
struct MarketSnapshot {
  double risk_free = 0.0;
  Eigen::VectorXd excess_return;  // beta = mu - r 1
  Eigen::MatrixXd gram;           // Sigma = sigma sigma'
  Eigen::VectorXd risk_direction;        // Sigma^{-1} beta
  Eigen::VectorXd distortion_direction;  // sigma' Sigma^{-1} beta
  double market_price_sq = 0.0;          // Theta = beta' Sigma^{-1} beta
};

/// Deterministic market curves for one risk-free and M risky assets,
/// validated and cached on their TimeGrid. Immutable after construction.
class MarketCurves {
 public:
  std::size_t num_assets() const noexcept { return num_assets_; }
  double horizon() const noexcept { return grid_.horizon(); }
  const TimeGrid& grid() const noexcept { return grid_; }

  /// Full snapshot at t; cached when t is a grid node.
  MarketSnapshot snapshot(double t) const;

  double risk_free(double t) const;
  Eigen::VectorXd drift(double t) const;
  Eigen::MatrixXd volatility(double t) const;
  Eigen::VectorXd excess_return(double t) const { return snapshot(t).excess_return; }
  Eigen::MatrixXd gram(double t) const { return snapshot(t).gram; }
  double market_price_sq(double t) const;

  /// Node-aligned caches.
  std::span<const double> risk_free_nodes() const noexcept { return r_nodes_; }
  std::span<const double> theta_nodes() const noexcept { return theta_nodes_; }

 private:
  friend MarketCurves build_market(const MarketSpec& spec);
  MarketCurves(const MarketSpec& spec, TimeGrid grid);

  MarketSnapshot compute(double t) const;
  void check_time(double t) const;

  std::size_t num_assets_;
  TimeGrid grid_;
  ScalarCurve risk_free_;
  VectorCurve drift_;
  MatrixCurve volatility_;
  std::vector<MarketSnapshot> cache_;
  std::vector<double> r_nodes_;
  std::vector<double> theta_nodes_;
};

/// Validates the spec and builds the market. Throws NonPositiveHorizon,
/// SingularGram (Sigma not symmetric positive definite at some node or knot)
/// or InvalidArgument (shape mismatch, non-finite values).
MarketCurves build_market(const MarketSpec& spec);

/// beta' Sigma^{-1} beta at t. Throws OutOfHorizon when t is outside [0, T].
double theta_at(const MarketCurves& market, double t);

/// Risk aversion gamma0, skewness preference phi0 and ambiguity aversion xi.
/// The induced wealth-dependent coefficients are gamma0/w and phi0/w^2, and
/// the ambiguity matrix is xi times the identity.
struct Preferences {
  double gamma0 = 2.0;
  double phi0 = 0.5;
  double xi = 1.0;

  void validate() const;

  double risk_aversion(double w) const { return gamma0 / w; }
  double skewness_preference(double w) const { return phi0 / (w * w); }

  /// True when gamma(w) is positive and strictly decreasing over the sample,
  /// and phi(w) is too whenever phi0 > 0 (nonnegative otherwise). Samples must
  /// be positive and ascending.
  bool wealth_curves_well_behaved(std::span<const double> wealth_samples) const;
};

}  // namespace mvs
