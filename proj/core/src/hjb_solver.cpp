#include "mvs/hjb_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mvs/numerics.hpp"

namespace mvs {

std::string_view to_string(ModelVariant variant) noexcept {
  switch (variant) {
    case ModelVariant::Full: return "Full";
    case ModelVariant::AmbiguityNeutral: return "AmbiguityNeutral";
    case ModelVariant::NoSkew: return "NoSkew";
    case ModelVariant::Basic: return "Basic";
  }
  return "Full";
}

ModelVariant parse_variant(std::string_view name) {
  for (auto v : {ModelVariant::Full, ModelVariant::AmbiguityNeutral, ModelVariant::NoSkew, ModelVariant::Basic}) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model variant '" + std::string(name) + "'");
}

std::string_view to_string(MispecKind kind) noexcept {
  return kind == MispecKind::IgnoreUncertainty ? "IgnoreUncertainty" : "IgnoreBoth";
}

Preferences effective_preferences(const Preferences& prefs, ModelVariant variant) noexcept {
  Preferences eff = prefs;
  if (variant == ModelVariant::AmbiguityNeutral || variant == ModelVariant::Basic) eff.xi = 0.0;
  if (variant == ModelVariant::NoSkew || variant == ModelVariant::Basic) eff.phi0 = 0.0;
  return eff;
}

double ratio_denominator(double h2, double h3, double g1, double k1, double gamma0, double phi0) noexcept {
  return gamma0 * h2 + 2.0 * phi0 * (g1 * k1 - h3);
}

double strategy_ratio(double h1, double h2, double h3, double g1, double k1, double gamma0, double phi0) noexcept {
  const double numerator = h1 + gamma0 * (g1 * g1 - h2) + phi0 * (h3 + 2.0 * g1 * g1 * g1 - 3.0 * g1 * k1);
  return numerator / ratio_denominator(h2, h3, g1, k1, gamma0, phi0);
}

namespace {

// State layout shared by both systems: (h1, h2, h3, g1, k1).
enum : std::size_t { H1 = 0, H2 = 1, H3 = 2, G1 = 3, K1 = 4 };
using State5 = std::array<double, 5>;

// r and Theta at every node and at every step midpoint.
struct Coefficients {
  std::vector<double> r, theta, r_mid, theta_mid;

  explicit Coefficients(const MarketCurves& market) {
    const TimeGrid& grid = market.grid();
    r.assign(market.risk_free_nodes().begin(), market.risk_free_nodes().end());
    theta.assign(market.theta_nodes().begin(), market.theta_nodes().end());
    r_mid.resize(grid.num_steps());
    theta_mid.resize(grid.num_steps());
    for (std::size_t i = 0; i < grid.num_steps(); ++i) {
      const auto snap = market.snapshot(0.5 * (grid.node(i) + grid.node(i + 1)));
      r_mid[i] = snap.risk_free;
      theta_mid[i] = snap.market_price_sq;
    }
  }

  // Stage position within the backward step from node i+1 to node i.
  std::pair<double, double> at(std::size_t i, double frac) const {
    if (frac == 0.0) return {r[i + 1], theta[i + 1]};
    if (frac == 1.0) return {r[i], theta[i]};
    return {r_mid[i], theta_mid[i]};
  }
};

void guard_denominator(double den, double eps, double t) {
  if (!std::isfinite(den)) {
    throw Error(ErrorCode::NonFiniteState, "ratio denominator is not finite near t=" + std::to_string(t));
  }
  if (den <= eps) {
    throw Error(ErrorCode::DegenerateDenominator,
                "delta3 = " + std::to_string(den) + " fell to the guard near t=" + std::to_string(t));
  }
}

template <std::size_t N>
void guard_state(const std::array<double, N>& y, double t) {
  for (double v : y) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteState, "coefficient state is not finite at t=" + std::to_string(t));
    }
  }
}

// Backward right-hand side of the coefficient system, dy/d(T-t).
// D = r + Theta f/(xi+1)^2 is the drift of the equilibrium wealth under the
// distorted measure and V = Theta f^2/(xi+1)^2 its squared volatility.
void coefficient_rhs(const State5& y, double r, double theta, const Preferences& p, double eps_den, double t,
                     State5& dy, double* f_out = nullptr) {
  const double den = ratio_denominator(y[H2], y[H3], y[G1], y[K1], p.gamma0, p.phi0);
  guard_denominator(den, eps_den, t);
  const double f = strategy_ratio(y[H1], y[H2], y[H3], y[G1], y[K1], p.gamma0, p.phi0);
  if (!std::isfinite(f)) throw Error(ErrorCode::NonFiniteState, "strategy ratio overflow at t=" + std::to_string(t));
  const double scale = (p.xi + 1.0) * (p.xi + 1.0);
  const double drift = r + theta * f / scale;
  const double var = theta * f * f / scale;
  dy[H1] = drift * y[H1] + 0.5 * p.xi * var * den;
  dy[H2] = (2.0 * drift + var) * y[H2];
  dy[H3] = 3.0 * (drift + var) * y[H3];
  dy[G1] = drift * y[G1];
  dy[K1] = (2.0 * drift + var) * y[K1];
  if (f_out) *f_out = f;
}

}  // namespace

CoefficientTable solve_system(const MarketCurves& market, const Preferences& prefs, ModelVariant variant,
                              const SolverOptions& options) {
  prefs.validate();
  const TimeGrid& grid = market.grid();
  const std::size_t n = grid.size();
  const Coefficients coeff(market);

  CoefficientTable table;
  table.variant = variant;
  table.grid = grid;
  table.prefs = prefs;
  table.effective = effective_preferences(prefs, variant);
  const Preferences& p = table.effective;

  for (auto* v : {&table.f, &table.h1, &table.h2, &table.h3, &table.g1, &table.k1, &table.delta3}) v->resize(n);

  State5 y{1.0, 1.0, 1.0, 1.0, 1.0};
  auto record = [&](std::size_t i) {
    table.h1[i] = y[H1];
    table.h2[i] = y[H2];
    table.h3[i] = y[H3];
    table.g1[i] = y[G1];
    table.k1[i] = y[K1];
    table.delta3[i] = ratio_denominator(y[H2], y[H3], y[G1], y[K1], p.gamma0, p.phi0);
    guard_denominator(table.delta3[i], options.eps_den, grid.node(i));
    table.f[i] = strategy_ratio(y[H1], y[H2], y[H3], y[G1], y[K1], p.gamma0, p.phi0);
  };
  record(n - 1);

  for (std::size_t i = n - 1; i-- > 0;) {
    numerics::rk4_step(y, grid.dt(), [&](double frac, const State5& state, State5& dy) {
      const auto [r, theta] = coeff.at(i, frac);
      coefficient_rhs(state, r, theta, p, options.eps_den, grid.node(i), dy);
    });
    guard_state(y, grid.node(i));
    record(i);
  }
  return table;
}

PicardResult solve_f_picard(const MarketCurves& market, const Preferences& prefs, const PicardOptions& options) {
  prefs.validate();
  if (!(options.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "Picard tolerance must be positive");
  const TimeGrid& grid = market.grid();
  const std::size_t n = grid.size();
  const double dt = grid.dt();
  const auto theta = market.theta_nodes();
  const auto r = market.risk_free_nodes();
  const double scale = (prefs.xi + 1.0) * (prefs.xi + 1.0);
  const double gamma0 = prefs.gamma0;
  const double phi0 = prefs.phi0;

  const std::vector<double> rate_tail = numerics::tail_integral(r, dt);
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = std::exp(-rate_tail[i]) / gamma0;
  f[n - 1] = 1.0 / gamma0;

  std::vector<double> drift(n), var(n), penalty(n), next(n);
  PicardResult result;
  double previous_change = std::numeric_limits<double>::infinity();
  double relaxation = 1.0;

  for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      drift[i] = r[i] + theta[i] * f[i] / scale;
      var[i] = theta[i] * f[i] * f[i] / scale;
    }
    // log g1 and the volatility integral, each from t to T.
    const auto log_g1 = numerics::tail_integral(drift, dt);
    const auto vol_tail = numerics::tail_integral(var, dt);

    std::vector<double> g1(n), h2(n), h3(n), den(n);
    for (std::size_t i = 0; i < n; ++i) {
      g1[i] = std::exp(log_g1[i]);
      h2[i] = std::exp(2.0 * log_g1[i] + vol_tail[i]);
      h3[i] = std::exp(3.0 * log_g1[i] + 3.0 * vol_tail[i]);
      den[i] = ratio_denominator(h2[i], h3[i], g1[i], h2[i], gamma0, phi0);
      guard_denominator(den[i], options.eps_den, grid.node(i));
      // Discounted penalty rate, integrated below against exp(-log g1).
      penalty[i] = 0.5 * prefs.xi * var[i] * den[i] * std::exp(-log_g1[i]);
    }
    const auto penalty_tail = numerics::tail_integral(penalty, dt);

    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double h1 = g1[i] + g1[i] * penalty_tail[i];
      const double candidate = strategy_ratio(h1, h2[i], h3[i], g1[i], h2[i], gamma0, phi0);
      if (!std::isfinite(candidate)) {
        throw Error(ErrorCode::NonFiniteState, "Picard iterate is not finite at t=" + std::to_string(grid.node(i)));
      }
      next[i] = f[i] + relaxation * (candidate - f[i]);
      change = std::max(change, std::abs(next[i] - f[i]));
    }
    next[n - 1] = 1.0 / gamma0;
    f.swap(next);

    result.iterations = iter;
    result.final_change = change;
    if (change < options.tol) {
      result.f = std::move(f);
      result.damped = relaxation < 1.0;
      return result;
    }
    if (change > previous_change) relaxation = 0.5;
    previous_change = change;
  }
  throw Error(ErrorCode::NoConvergence, "Picard iteration did not reach tol " + std::to_string(options.tol) +
                                            " in " + std::to_string(options.max_iter) + " iterations (last change " +
                                            std::to_string(result.final_change) + ")");
}

MispecTable solve_mispec_system(const MarketCurves& market, const Preferences& prefs, MispecKind kind,
                                const SolverOptions& options) {
  prefs.validate();
  const TimeGrid& grid = market.grid();
  const std::size_t n = grid.size();
  const Coefficients coeff(market);

  const ModelVariant driver_variant =
      kind == MispecKind::IgnoreUncertainty ? ModelVariant::AmbiguityNeutral : ModelVariant::Basic;
  const Preferences driver = effective_preferences(prefs, driver_variant);

  MispecTable table;
  table.kind = kind;
  table.grid = grid;
  table.prefs = prefs;
  table.effective = prefs;
  if (kind == MispecKind::IgnoreBoth) table.effective.phi0 = 0.0;
  const Preferences& p = table.effective;

  for (auto* v : {&table.driver_f, &table.a, &table.a1, &table.a2, &table.a3, &table.b1, &table.c1, &table.delta3}) {
    v->resize(n);
  }

  // Driver state (h1..k1 of the pre-specified strategy's own model) followed
  // by (a1, a2, a3, b1, c1).
  using State10 = std::array<double, 10>;
  State10 y;
  y.fill(1.0);

  auto split = [](const State10& s, State5& head, State5& tail) {
    std::copy_n(s.begin(), 5, head.begin());
    std::copy_n(s.begin() + 5, 5, tail.begin());
  };

  auto record = [&](std::size_t i) {
    State5 d, m;
    split(y, d, m);
    table.driver_f[i] = strategy_ratio(d[H1], d[H2], d[H3], d[G1], d[K1], driver.gamma0, driver.phi0);
    table.a1[i] = m[H1];
    table.a2[i] = m[H2];
    table.a3[i] = m[H3];
    table.b1[i] = m[G1];
    table.c1[i] = m[K1];
    table.delta3[i] = ratio_denominator(m[H2], m[H3], m[G1], m[K1], p.gamma0, p.phi0);
    guard_denominator(table.delta3[i], options.eps_den, grid.node(i));
    table.a[i] = strategy_ratio(m[H1], m[H2], m[H3], m[G1], m[K1], p.gamma0, p.phi0);
  };
  record(n - 1);

  for (std::size_t i = n - 1; i-- > 0;) {
    const double t = grid.node(i);
    numerics::rk4_step(y, grid.dt(), [&](double frac, const State10& state, State10& dy) {
      const auto [r, theta] = coeff.at(i, frac);
      State5 d, m, dd;
      split(state, d, m);
      double driver_f = 0.0;
      coefficient_rhs(d, r, theta, driver, options.eps_den, t, dd, &driver_f);

      const double den = ratio_denominator(m[H2], m[H3], m[G1], m[K1], p.gamma0, p.phi0);
      guard_denominator(den, options.eps_den, t);
      const double a = strategy_ratio(m[H1], m[H2], m[H3], m[G1], m[K1], p.gamma0, p.phi0);
      const double var = theta * driver_f * driver_f;
      // Nature's best response shifts the drift by -xi Theta f~^2 / a.
      const double drift = r + theta * driver_f - p.xi * var / a;
      if (!std::isfinite(drift)) {
        throw Error(ErrorCode::NonFiniteState, "misspecified drift is not finite near t=" + std::to_string(t));
      }
      std::copy(dd.begin(), dd.end(), dy.begin());
      dy[5 + H1] = drift * m[H1] + 0.5 * p.xi * var * den;
      dy[5 + H2] = (2.0 * drift + var) * m[H2];
      dy[5 + H3] = 3.0 * (drift + var) * m[H3];
      dy[5 + G1] = drift * m[G1];
      dy[5 + K1] = (2.0 * drift + var) * m[K1];
    });
    guard_state(y, t);
    record(i);
  }
  return table;
}

ClosedFormCoefficients closed_form_coefficients(const MarketCurves& market, const CoefficientTable& table) {
  if (!(market.grid() == table.grid)) {
    throw Error(ErrorCode::UnsolvedTable, "table grid does not match the market grid");
  }
  const std::size_t n = table.size();
  const double dt = table.grid.dt();
  const auto theta = market.theta_nodes();
  const auto r = market.risk_free_nodes();
  const Preferences& p = table.effective;
  const double scale = (p.xi + 1.0) * (p.xi + 1.0);

  std::vector<double> drift(n), var(n);
  for (std::size_t i = 0; i < n; ++i) {
    drift[i] = r[i] + theta[i] * table.f[i] / scale;
    var[i] = theta[i] * table.f[i] * table.f[i] / scale;
  }
  const auto log_g1 = numerics::tail_integral(drift, dt);
  const auto vol_tail = numerics::tail_integral(var, dt);

  ClosedFormCoefficients out;
  out.g1.resize(n);
  out.h2.resize(n);
  out.h3.resize(n);
  out.h1.resize(n);
  std::vector<double> penalty(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.g1[i] = std::exp(log_g1[i]);
    out.h2[i] = std::exp(2.0 * log_g1[i] + vol_tail[i]);
    out.h3[i] = std::exp(3.0 * log_g1[i] + 3.0 * vol_tail[i]);
    const double den = ratio_denominator(out.h2[i], out.h3[i], out.g1[i], out.h2[i], p.gamma0, p.phi0);
    penalty[i] = 0.5 * p.xi * var[i] * den * std::exp(-log_g1[i]);
  }
  const auto penalty_tail = numerics::tail_integral(penalty, dt);
  for (std::size_t i = 0; i < n; ++i) out.h1[i] = out.g1[i] * (1.0 + penalty_tail[i]);
  return out;
}

}  // namespace mvs
