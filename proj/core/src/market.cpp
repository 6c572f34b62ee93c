#include "mvs/market.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mvs {

TimeGrid::TimeGrid(double horizon, std::size_t num_steps) : horizon_(horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorCode::NonPositiveHorizon, "horizon must be positive, got " + std::to_string(horizon));
  }
  if (num_steps == 0) {
    throw Error(ErrorCode::InvalidArgument, "time grid needs at least one step");
  }
  dt_ = horizon / static_cast<double>(num_steps);
  nodes_.resize(num_steps + 1);
  for (std::size_t i = 0; i < num_steps; ++i) {
    nodes_[i] = horizon * static_cast<double>(i) / static_cast<double>(num_steps);
  }
  nodes_[num_steps] = horizon;
}

std::size_t TimeGrid::node_index(double t) const noexcept {
  if (!(t >= 0.0) || t > horizon_) return size();
  const auto i = static_cast<std::size_t>(std::llround(t / dt_));
  if (i < size() && nodes_[i] == t) return i;
  return size();
}

template <class Value>
PiecewiseLinear<Value>::PiecewiseLinear(std::vector<double> times, std::vector<Value> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.empty() || times_.size() != values_.size()) {
    throw Error(ErrorCode::InvalidArgument, "piecewise-linear curve needs matching, non-empty knots");
  }
  if (!std::is_sorted(times_.begin(), times_.end()) ||
      std::adjacent_find(times_.begin(), times_.end()) != times_.end()) {
    throw Error(ErrorCode::InvalidArgument, "curve knot times must be strictly increasing");
  }
}

template <class Value>
Value PiecewiseLinear<Value>::operator()(double t) const {
  if (values_.size() == 1 || t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
  const std::size_t lo = hi - 1;
  const double weight = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return Value((1.0 - weight) * values_[lo] + weight * values_[hi]);
}

template class PiecewiseLinear<double>;
template class PiecewiseLinear<Eigen::VectorXd>;
template class PiecewiseLinear<Eigen::MatrixXd>;

MarketSpec MarketSpec::constant(double horizon, std::size_t num_steps, double r, const Eigen::VectorXd& mu,
                                const Eigen::MatrixXd& sigma) {
  MarketSpec spec;
  spec.horizon = horizon;
  spec.num_steps = num_steps;
  spec.risk_free = ScalarCurve(r);
  spec.drift = VectorCurve(mu);
  spec.volatility = MatrixCurve(sigma);
  return spec;
}

MarketSpec MarketSpec::single_asset(double horizon, std::size_t num_steps, double r, double mu, double sigma) {
  return constant(horizon, num_steps, r, Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, sigma));
}

namespace {

bool all_finite(double v) { return std::isfinite(v); }
bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }
bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

template <class Value>
void check_finite(const PiecewiseLinear<Value>& curve, const char* name) {
  for (const auto& v : curve.values()) {
    if (!all_finite(v)) throw Error(ErrorCode::InvalidArgument, std::string(name) + " curve has non-finite values");
  }
}

}  // namespace

MarketCurves::MarketCurves(const MarketSpec& spec, TimeGrid grid)
    : num_assets_(0),
      grid_(std::move(grid)),
      risk_free_(spec.risk_free),
      drift_(spec.drift),
      volatility_(spec.volatility) {
  if (drift_.values().empty() || volatility_.values().empty()) {
    throw Error(ErrorCode::InvalidArgument, "market needs drift and volatility curves");
  }
  num_assets_ = static_cast<std::size_t>(drift_.values().front().size());
  if (num_assets_ == 0) throw Error(ErrorCode::InvalidArgument, "market needs at least one risky asset");
  for (const auto& mu : drift_.values()) {
    if (static_cast<std::size_t>(mu.size()) != num_assets_) {
      throw Error(ErrorCode::InvalidArgument, "drift knots disagree on the number of assets");
    }
  }
  for (const auto& sigma : volatility_.values()) {
    if (static_cast<std::size_t>(sigma.rows()) != num_assets_ || sigma.cols() != sigma.rows()) {
      throw Error(ErrorCode::InvalidArgument, "volatility must be an M x M matrix");
    }
  }
  check_finite(risk_free_, "risk-free");
  check_finite(drift_, "drift");
  check_finite(volatility_, "volatility");

  cache_.reserve(grid_.size());
  r_nodes_.reserve(grid_.size());
  theta_nodes_.reserve(grid_.size());
  for (double t : grid_.nodes()) {
    cache_.push_back(compute(t));
    r_nodes_.push_back(cache_.back().risk_free);
    theta_nodes_.push_back(cache_.back().market_price_sq);
  }
  // Knots between nodes are extreme points of the piecewise-linear sigma.
  for (double t : volatility_.knots()) {
    if (t > 0.0 && t < grid_.horizon()) (void)compute(t);
  }
}

MarketSnapshot MarketCurves::compute(double t) const {
  MarketSnapshot s;
  s.risk_free = risk_free_(t);
  const Eigen::MatrixXd sigma = volatility_(t);
  s.excess_return = drift_(t) - Eigen::VectorXd::Constant(static_cast<Eigen::Index>(num_assets_), s.risk_free);
  s.gram = sigma * sigma.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(s.gram);
  if (llt.info() != Eigen::Success || !s.gram.allFinite()) {
    throw Error(ErrorCode::SingularGram, "Sigma is not symmetric positive definite at t=" + std::to_string(t));
  }
  s.risk_direction = llt.solve(s.excess_return);
  s.distortion_direction = sigma.transpose() * s.risk_direction;
  s.market_price_sq = s.excess_return.dot(s.risk_direction);
  if (!std::isfinite(s.market_price_sq) || !s.risk_direction.allFinite()) {
    throw Error(ErrorCode::SingularGram, "Sigma is numerically singular at t=" + std::to_string(t));
  }
  // Round-off can leave a tiny negative value when beta is (nearly) zero.
  s.market_price_sq = std::max(s.market_price_sq, 0.0);
  return s;
}

void MarketCurves::check_time(double t) const {
  if (!(t >= 0.0) || t > grid_.horizon()) {
    throw Error(ErrorCode::OutOfHorizon,
                "t=" + std::to_string(t) + " outside [0, " + std::to_string(grid_.horizon()) + "]");
  }
}

MarketSnapshot MarketCurves::snapshot(double t) const {
  check_time(t);
  const std::size_t i = grid_.node_index(t);
  if (i < cache_.size()) return cache_[i];
  return compute(t);
}

double MarketCurves::risk_free(double t) const {
  check_time(t);
  return risk_free_(t);
}

Eigen::VectorXd MarketCurves::drift(double t) const {
  check_time(t);
  return drift_(t);
}

Eigen::MatrixXd MarketCurves::volatility(double t) const {
  check_time(t);
  return volatility_(t);
}

double MarketCurves::market_price_sq(double t) const {
  check_time(t);
  const std::size_t i = grid_.node_index(t);
  if (i < theta_nodes_.size()) return theta_nodes_[i];
  return compute(t).market_price_sq;
}

MarketCurves build_market(const MarketSpec& spec) {
  TimeGrid grid(spec.horizon, spec.num_steps);
  return MarketCurves(spec, std::move(grid));
}

double theta_at(const MarketCurves& market, double t) { return market.market_price_sq(t); }

void Preferences::validate() const {
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) {
    throw Error(ErrorCode::InvalidArgument, "gamma0 must be positive");
  }
  if (!(phi0 >= 0.0) || !std::isfinite(phi0)) {
    throw Error(ErrorCode::InvalidArgument, "phi0 must be nonnegative");
  }
  if (!(xi >= 0.0) || !std::isfinite(xi)) {
    throw Error(ErrorCode::InvalidArgument, "xi must be nonnegative");
  }
}

bool Preferences::wealth_curves_well_behaved(std::span<const double> wealth_samples) const {
  double prev_gamma = 0.0;
  double prev_phi = 0.0;
  for (std::size_t i = 0; i < wealth_samples.size(); ++i) {
    const double w = wealth_samples[i];
    if (!(w > 0.0)) return false;
    const double g = risk_aversion(w);
    const double p = skewness_preference(w);
    if (!(g > 0.0) || p < 0.0 || (phi0 > 0.0 && !(p > 0.0))) return false;
    if (i > 0) {
      if (!(g < prev_gamma)) return false;
      if (phi0 > 0.0 && !(p < prev_phi)) return false;
    }
    prev_gamma = g;
    prev_phi = p;
  }
  return true;
}

}  // namespace mvs
