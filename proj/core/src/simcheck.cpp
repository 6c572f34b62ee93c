#include "mvs/simcheck.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include "mvs/numerics.hpp"
#include "mvs/policy.hpp"

namespace mvs {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u, kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

namespace {

double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<double, 2> path_normal_pair(std::uint64_t seed, std::uint64_t path, std::uint64_t pair) noexcept {
  const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(path),
                                         static_cast<std::uint32_t>(path >> 32), static_cast<std::uint32_t>(pair >> 32)};
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto x = philox4x32(ctr, key);
  const double radius = std::sqrt(-2.0 * std::log(to_unit(x[0], x[1])));
  const double angle = 2.0 * std::numbers::pi * to_unit(x[2], x[3]);
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double path_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step) noexcept {
  return path_normal_pair(seed, path, step >> 1)[step & 1u];
}

std::string_view to_string(Scheme scheme) noexcept {
  return scheme == Scheme::ExactLognormal ? "ExactLognormal" : "EulerMaruyama";
}

std::string_view to_string(Measure measure) noexcept {
  return measure == Measure::Distorted ? "Distorted" : "Reference";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "ExactLognormal") return Scheme::ExactLognormal;
  if (name == "EulerMaruyama") return Scheme::EulerMaruyama;
  throw Error(ErrorCode::InvalidArgument, "unknown scheme '" + std::string(name) + "'");
}

Measure parse_measure(std::string_view name) {
  if (name == "Distorted") return Measure::Distorted;
  if (name == "Reference") return Measure::Reference;
  throw Error(ErrorCode::InvalidArgument, "unknown measure '" + std::string(name) + "'");
}

void SimConfig::validate() const {
  if (num_paths < 2) throw Error(ErrorCode::InvalidArgument, "num_paths must be at least 2");
  if (!(start_wealth > 0.0) || !std::isfinite(start_wealth)) {
    throw Error(ErrorCode::NonPositiveWealth, "start wealth must be positive");
  }
  if (!(start_time >= 0.0) || !std::isfinite(start_time)) {
    throw Error(ErrorCode::OutOfHorizon, "start time must be nonnegative");
  }
  if (euler_substeps == 0) throw Error(ErrorCode::InvalidArgument, "euler_substeps must be positive");
}

std::size_t default_workers() {
  if (const char* env = std::getenv("MVS_ROBUST_THREADS")) {
    std::size_t n = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, n);
    if (ec == std::errc{} && ptr == end && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

WealthLaw wealth_law(const CoefficientTable& table, const MarketCurves& market) {
  if (!(market.grid() == table.grid) || table.size() != table.grid.size()) {
    throw Error(ErrorCode::UnsolvedTable, "table grid does not match the market grid");
  }
  const Preferences& p = table.effective;
  const std::size_t n = table.size();
  const auto r = market.risk_free_nodes();
  const auto theta = market.theta_nodes();
  const double scale = (p.xi + 1.0) * (p.xi + 1.0);

  WealthLaw law;
  law.grid = table.grid;
  law.gamma0 = p.gamma0;
  law.phi0 = p.phi0;
  law.xi = p.xi;
  law.delta3 = table.delta3;
  for (auto* v : {&law.drift_distorted, &law.drift_reference, &law.vol_sq, &law.penalty_rate}) v->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = table.f[i];
    law.drift_distorted[i] = r[i] + theta[i] * f / scale;
    law.drift_reference[i] = r[i] + theta[i] * f / (p.xi + 1.0);
    law.vol_sq[i] = theta[i] * f * f / scale;
    law.penalty_rate[i] = 0.5 * p.xi * law.vol_sq[i] * table.delta3[i];
  }
  return law;
}

WealthLaw wealth_law(const MispecTable& table, const MarketCurves& market) {
  if (!(market.grid() == table.grid) || table.size() != table.grid.size()) {
    throw Error(ErrorCode::UnsolvedTable, "table grid does not match the market grid");
  }
  const Preferences& p = table.effective;
  const std::size_t n = table.size();
  const auto r = market.risk_free_nodes();
  const auto theta = market.theta_nodes();

  WealthLaw law;
  law.grid = table.grid;
  law.gamma0 = p.gamma0;
  law.phi0 = p.phi0;
  law.xi = p.xi;
  law.delta3 = table.delta3;
  for (auto* v : {&law.drift_distorted, &law.drift_reference, &law.vol_sq, &law.penalty_rate}) v->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = table.driver_f[i];
    law.vol_sq[i] = theta[i] * f * f;
    law.drift_reference[i] = r[i] + theta[i] * f;
    law.drift_distorted[i] = law.drift_reference[i] - p.xi * law.vol_sq[i] / table.a[i];
    law.penalty_rate[i] = 0.5 * p.xi * law.vol_sq[i] * table.delta3[i];
  }
  return law;
}

namespace {

constexpr std::size_t kChunk = 1000;
// Tracked per path: W_T, W_T^2, W_T^3, W_T^4, penalty integral.
constexpr std::size_t kVars = 5;

std::size_t start_index(const TimeGrid& grid, double t) {
  if (t > grid.horizon()) throw Error(ErrorCode::OutOfHorizon, "start time beyond the horizon");
  const std::size_t i = grid.node_index(t);
  if (i >= grid.size()) {
    throw Error(ErrorCode::InvalidArgument, "start time " + std::to_string(t) + " is not a grid node");
  }
  return i;
}

struct PathOutput {
  std::array<double, kVars> vars{};
  double min_wealth = 0.0;
};

// Per-step constants of the path recursion.
struct Stepper {
  const WealthLaw& law;
  const SimConfig& cfg;
  std::size_t first;
  std::vector<double> log_mean, log_sd;
  const std::vector<double>& drift;

  Stepper(const WealthLaw& l, const SimConfig& c, std::size_t i0)
      : law(l), cfg(c), first(i0), drift(l.drift(c.measure)) {
    const std::size_t n = law.grid.size();
    const double dt = law.grid.dt();
    log_mean.assign(n, 0.0);
    log_sd.assign(n, 0.0);
    for (std::size_t j = first; j + 1 < n; ++j) {
      const double var = 0.5 * dt * (law.vol_sq[j] + law.vol_sq[j + 1]);
      log_mean[j] = 0.5 * dt * (drift[j] + drift[j + 1]) - 0.5 * var;
      log_sd[j] = std::sqrt(var);
    }
  }

  // Calls visit(node, wealth) for every node from the start to T.
  template <class Visit>
  void run(std::uint64_t path, Visit&& visit) const {
    const std::size_t n = law.grid.size();
    std::array<double, 2> pair{};
    std::uint64_t cached = ~std::uint64_t{0};
    auto normal = [&](std::uint64_t step) {
      if ((step >> 1) != cached) {
        cached = step >> 1;
        pair = path_normal_pair(cfg.seed, path, cached);
      }
      return pair[step & 1u];
    };
    double w = cfg.start_wealth;
    visit(first, w);
    if (cfg.scheme == Scheme::ExactLognormal) {
      for (std::size_t j = first; j + 1 < n; ++j) {
        w *= std::exp(log_mean[j] + log_sd[j] * normal(j));
        visit(j + 1, w);
      }
      return;
    }
    const std::size_t m = cfg.euler_substeps;
    const double h = law.grid.dt() / static_cast<double>(m);
    const double sqrt_h = std::sqrt(h);
    for (std::size_t j = first; j + 1 < n; ++j) {
      for (std::size_t k = 0; k < m; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(m);
        const double mu = drift[j] + frac * (drift[j + 1] - drift[j]);
        const double v = law.vol_sq[j] + frac * (law.vol_sq[j + 1] - law.vol_sq[j]);
        w += w * (mu * h + std::sqrt(v) * sqrt_h * normal(j * m + k));
      }
      visit(j + 1, w);
    }
  }

  PathOutput path(std::uint64_t index, std::vector<double>* node_fourth) const {
    const std::size_t n = law.grid.size();
    const double dt = law.grid.dt();
    PathOutput out;
    out.min_wealth = std::numeric_limits<double>::infinity();
    double penalty = 0.0;
    double wT = 0.0;
    run(index, [&](std::size_t node, double w) {
      const double weight = (node == first || node == n - 1) ? 0.5 : 1.0;
      if (first + 1 < n) penalty += weight * dt * law.penalty_rate[node] * w;
      out.min_wealth = std::min(out.min_wealth, w);
      if (node_fourth) {
        const double w2 = w * w;
        (*node_fourth)[node] += w2 * w2;
      }
      wT = w;
    });
    const double w2 = wT * wT;
    out.vars = {wT, w2, w2 * wT, w2 * w2, penalty};
    return out;
  }
};

struct ChunkSums {
  std::size_t count = 0;
  std::array<double, kVars> first{};
  std::array<double, kVars * kVars> second{};
  std::vector<double> node_fourth;
  double min_wealth = std::numeric_limits<double>::infinity();
};

}  // namespace

SimResult simulate_equilibrium_wealth(const WealthLaw& law, const SimConfig& cfg) {
  cfg.validate();
  const std::size_t i0 = start_index(law.grid, cfg.start_time);
  const Stepper stepper(law, cfg, i0);
  const std::size_t n_nodes = law.grid.size();

  // Moments are accumulated as deviations from path 0 so that a
  // deterministic market yields exactly zero spread.
  const PathOutput anchor = stepper.path(0, nullptr);

  const std::size_t num_chunks = (cfg.num_paths + kChunk - 1) / kChunk;
  std::vector<ChunkSums> chunks(num_chunks);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < num_chunks; c = next++) {
      ChunkSums& s = chunks[c];
      s.node_fourth.assign(n_nodes, 0.0);
      const std::size_t begin = c * kChunk;
      const std::size_t end = std::min(cfg.num_paths, begin + kChunk);
      for (std::size_t p = begin; p < end; ++p) {
        const PathOutput out = stepper.path(p, &s.node_fourth);
        std::array<double, kVars> d;
        for (std::size_t a = 0; a < kVars; ++a) d[a] = out.vars[a] - anchor.vars[a];
        for (std::size_t a = 0; a < kVars; ++a) {
          s.first[a] += d[a];
          for (std::size_t b = 0; b <= a; ++b) s.second[a * kVars + b] += d[a] * d[b];
        }
        s.min_wealth = std::min(s.min_wealth, out.min_wealth);
        ++s.count;
      }
    }
  };
  const std::size_t workers = std::min(cfg.workers == 0 ? default_workers() : cfg.workers, num_chunks);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  ChunkSums total;
  total.node_fourth.assign(n_nodes, 0.0);
  for (const ChunkSums& s : chunks) {
    total.count += s.count;
    for (std::size_t a = 0; a < kVars; ++a) total.first[a] += s.first[a];
    for (std::size_t a = 0; a < kVars * kVars; ++a) total.second[a] += s.second[a];
    for (std::size_t i = 0; i < n_nodes; ++i) total.node_fourth[i] += s.node_fourth[i];
    total.min_wealth = std::min(total.min_wealth, s.min_wealth);
  }

  const double n = static_cast<double>(total.count);
  std::array<double, kVars> mean, shift_mean;
  for (std::size_t a = 0; a < kVars; ++a) {
    shift_mean[a] = total.first[a] / n;
    mean[a] = anchor.vars[a] + shift_mean[a];
  }
  auto cov = [&](std::size_t a, std::size_t b) {
    if (b > a) std::swap(a, b);
    return (total.second[a * kVars + b] - n * shift_mean[a] * shift_mean[b]) / (n - 1.0);
  };

  SimResult res;
  res.num_paths = total.count;
  for (std::size_t k = 0; k < 4; ++k) res.raw_moments[k] = {mean[k], std::sqrt(std::max(cov(k, k), 0.0) / n)};
  // Central moments about the sample mean, from the shifted sums.
  res.variance = std::max(cov(0, 0), 0.0);
  const double m1 = mean[0];
  res.third_central = mean[2] - 3.0 * m1 * mean[1] + 2.0 * m1 * m1 * m1;
  if (res.variance == 0.0) res.third_central = 0.0;
  res.min_wealth = total.min_wealth;
  res.sup_fourth_moment = 0.0;
  for (std::size_t i = i0; i < n_nodes; ++i) res.sup_fourth_moment = std::max(res.sup_fourth_moment, total.node_fourth[i] / n);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (cfg.measure != Measure::Distorted) {
    res.penalty = {nan, nan};
    res.objective = {nan, nan};
    return res;
  }
  res.penalty = {mean[4], std::sqrt(std::max(cov(4, 4), 0.0) / n)};

  const double w = cfg.start_wealth;
  const double cg = law.gamma0 / (2.0 * w);
  const double cp = law.phi0 / (3.0 * w * w);
  const double plug_var = res.variance * (n - 1.0) / n;
  res.objective.value = m1 - cg * plug_var + cp * res.third_central + mean[4];
  // Delta method over the means of (W, W^2, W^3, penalty).
  const std::array<std::size_t, 4> idx{0, 1, 2, 4};
  const std::array<double, 4> grad{1.0 + 2.0 * cg * m1 + cp * (6.0 * m1 * m1 - 3.0 * mean[1]),
                                   -cg - 3.0 * cp * m1, cp, 1.0};
  double var_obj = 0.0;
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) var_obj += grad[a] * grad[b] * cov(idx[a], idx[b]);
  }
  res.objective.std_error = std::sqrt(std::max(var_obj, 0.0) / n);
  return res;
}

SimResult simulate_equilibrium_wealth(const CoefficientTable& table, const MarketCurves& market,
                                      const SimConfig& cfg) {
  return simulate_equilibrium_wealth(wealth_law(table, market), cfg);
}

namespace {

// int_t^T y ds by trapezoid on the grid, with a linear partial first segment.
double integral_from(const TimeGrid& grid, const std::vector<double>& y, double t) {
  if (!(t >= 0.0) || t > grid.horizon()) {
    throw Error(ErrorCode::OutOfHorizon,
                "t=" + std::to_string(t) + " outside [0, " + std::to_string(grid.horizon()) + "]");
  }
  const std::size_t node = grid.node_index(t);
  const double dt = grid.dt();
  std::size_t i;
  double partial = 0.0;
  if (node < grid.size()) {
    i = node;
  } else {
    const auto lo = std::min(static_cast<std::size_t>(std::floor(t / dt)), grid.num_steps() - 1);
    i = lo + 1;
    const double frac = (t - grid.node(lo)) / dt;
    const double y_t = y[lo] + frac * (y[i] - y[lo]);
    partial = 0.5 * (grid.node(i) - t) * (y_t + y[i]);
  }
  double sum = 0.0;
  for (std::size_t j = i; j + 1 < grid.size(); ++j) sum += 0.5 * dt * (y[j] + y[j + 1]);
  return partial + sum;
}

}  // namespace

double lognormal_moment(const WealthLaw& law, Measure measure, double t, double w, int order) {
  if (order < 1 || order > 4) throw Error(ErrorCode::InvalidArgument, "moment order must be 1..4");
  const double n = order;
  const auto& drift = law.drift(measure);
  std::vector<double> rate(drift.size());
  for (std::size_t i = 0; i < rate.size(); ++i) rate[i] = n * drift[i] + 0.5 * n * (n - 1.0) * law.vol_sq[i];
  return std::pow(w, n) * std::exp(integral_from(law.grid, rate, t));
}

double lognormal_moments(const CoefficientTable& table, const MarketCurves& market, double t, double w, int order) {
  return lognormal_moment(wealth_law(table, market), Measure::Distorted, t, w, order);
}

ValueVerification verify_value(const CoefficientTable& table, const MispecTable* mispec, const MarketCurves& market,
                               double t, double w, const SimConfig& cfg, double rel_tol) {
  if (!(w > 0.0)) throw Error(ErrorCode::NonPositiveWealth, "wealth must be positive");
  const WealthLaw law = mispec ? wealth_law(*mispec, market) : wealth_law(table, market);
  const std::size_t i0 = start_index(law.grid, t);
  const std::size_t n = law.grid.size();
  if (law.xi > 0.0) {
    for (std::size_t i = i0; i < n; ++i) {
      if (!(law.delta3[i] > 0.0)) {
        throw Error(ErrorCode::PenaltyUndefined, "delta3 is not positive at t=" + std::to_string(law.grid.node(i)));
      }
    }
  }

  ValueVerification out;
  if (mispec) {
    out.value = w * value_coefficient(mispec->a1[i0], mispec->a2[i0], mispec->a3[i0], mispec->b1[i0], law.gamma0,
                                      law.phi0);
  } else {
    out.value = w * value_coefficient(table.h1[i0], table.h2[i0], table.h3[i0], table.g1[i0], law.gamma0, law.phi0);
  }

  const double m1 = lognormal_moment(law, Measure::Distorted, t, w, 1);
  const double m2 = lognormal_moment(law, Measure::Distorted, t, w, 2);
  const double m3 = lognormal_moment(law, Measure::Distorted, t, w, 3);
  const double var = m2 - m1 * m1;
  const double third = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;

  // E[W_s] along the grid and the penalty density against it.
  const double dt = law.grid.dt();
  std::vector<double> density(n - i0);
  double log_mean = 0.0;
  for (std::size_t i = i0; i < n; ++i) {
    if (i > i0) log_mean += 0.5 * dt * (law.drift_distorted[i - 1] + law.drift_distorted[i]);
    density[i - i0] = law.penalty_rate[i] * w * std::exp(log_mean);
  }
  out.analytic_penalty = numerics::trapezoid(density, dt);
  out.analytic_objective =
      m1 - law.gamma0 / (2.0 * w) * var + law.phi0 / (3.0 * w * w) * third + out.analytic_penalty;
  out.analytic_rel_error = std::abs(out.analytic_objective - out.value) / std::abs(out.value);
  out.analytic_pass = out.analytic_rel_error < rel_tol;

  if (cfg.num_paths > 0) {
    SimConfig sim = cfg;
    sim.start_time = t;
    sim.start_wealth = w;
    sim.measure = Measure::Distorted;
    out.mc = simulate_equilibrium_wealth(law, sim);
    const double diff = out.mc->objective.value - out.value;
    const double se = out.mc->objective.std_error;
    out.mc_z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff));
    out.mc_pass = std::abs(diff) <= 3.0 * se + 1e-12 * std::abs(out.value);
  }
  return out;
}

MomentBoundReport moment_bound_check(const CoefficientTable& table, const MarketCurves& market, const SimConfig& cfg) {
  const WealthLaw law = wealth_law(table, market);
  const std::size_t i0 = start_index(law.grid, cfg.start_time);
  const auto& drift = law.drift(cfg.measure);
  const double dt = law.grid.dt();
  const double w4 = std::pow(cfg.start_wealth, 4);

  MomentBoundReport report;
  double exponent = 0.0;
  report.analytic_sup = w4;
  report.analytic_argmax_time = law.grid.node(i0);
  for (std::size_t i = i0 + 1; i < law.grid.size(); ++i) {
    exponent += 0.5 * dt * (4.0 * (drift[i - 1] + drift[i]) + 6.0 * (law.vol_sq[i - 1] + law.vol_sq[i]));
    const double m4 = w4 * std::exp(exponent);
    if (m4 > report.analytic_sup) {
      report.analytic_sup = m4;
      report.analytic_argmax_time = law.grid.node(i);
    }
  }
  report.finite = std::isfinite(report.analytic_sup);
  if (cfg.num_paths > 0) {
    const SimResult sim = simulate_equilibrium_wealth(law, cfg);
    report.mc_sup = sim.sup_fourth_moment;
    report.ratio = report.mc_sup / report.analytic_sup;
    report.consistent = std::isfinite(report.ratio) && report.ratio >= 0.8 && report.ratio <= 1.25;
  }
  return report;
}

}  // namespace mvs
