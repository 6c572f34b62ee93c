// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mvs/cli/commands.hpp"
#include "mvs/cli/config.hpp"
#include "mvs/policy.hpp"
#include "mvs/simcheck.hpp"

using namespace mvs;
using namespace mvs::cli;

namespace {

constexpr double kMachine = 4.0 * std::numeric_limits<double>::epsilon();

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::pair<bool, std::string>> parts;

  void part(bool ok, std::string text) {
    pass = pass && ok;
    parts.emplace_back(ok, std::move(text));
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

MarketCurves single_market(double mu, double sigma = 0.25, double r = 0.05) {
  return build_market(MarketSpec::single_asset(5.0, 2000, r, mu, sigma));
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct Draw {
  Preferences prefs;
  double theta = 0.0;
  MarketCurves market;
};

// Parameter box for the randomized draws. A draw is discarded only when
// neither the ODE route nor the fixed-point route produces a solution.
struct Draws {
  std::vector<Draw> accepted;
  std::size_t rejected = 0;
};

Draws make_draws(std::size_t count) {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> gamma0(0.5, 5.0), phi0(0.0, 1.0), xi(0.0, 3.0), theta(0.0, 0.5);
  Draws d;
  while (d.accepted.size() < count) {
    const Preferences p{gamma0(rng), phi0(rng), xi(rng)};
    const double th = theta(rng);
    MarketCurves m = single_market(0.05 + 0.25 * std::sqrt(th));
    bool solved = true;
    try {
      (void)solve_system(m, p, ModelVariant::Full);
    } catch (const Error&) {
      try {
        (void)solve_f_picard(m, p);
      } catch (const Error&) {
        solved = false;
      }
    }
    if (solved) {
      d.accepted.push_back({p, th, std::move(m)});
    } else {
      ++d.rejected;
    }
  }
  return d;
}

std::string describe(const Draw& d) {
  return "gamma0=" + num(d.prefs.gamma0) + " phi0=" + num(d.prefs.phi0) + " xi=" + num(d.prefs.xi) +
         " Theta=" + num(d.theta);
}

std::vector<SweepRow> sweep_axis(const RunConfig& base, const SweepAxis& axis) {
  return run_sweep(SweepSpec{axis.param, base, axis, std::nullopt}, default_workers());
}

std::vector<double> column(const std::vector<SweepRow>& rows, const std::string& name) {
  const std::size_t c = sweep_column(1, name);
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.values[c]);
  return out;
}

// NaN entries (failed cells) never satisfy a strict ordering.
bool strictly(const std::vector<double>& v, bool increasing) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return false;
    if (i > 0 && !(increasing ? v[i] > v[i - 1] : v[i] < v[i - 1])) return false;
  }
  return true;
}

bool all_positive(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
}

std::string first_failure(const std::vector<SweepRow>& rows) {
  for (const auto& r : rows) {
    if (r.status != "ok") {
      std::string at;
      for (double p : r.params) at += (at.empty() ? "" : ",") + num(p);
      return " first_failed_cell=(" + at + ") " + r.status;
    }
  }
  return "";
}

std::string range(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return "[" + num(*lo) + ", " + num(*hi) + "]";
}

struct Shared {
  Draws draws;
  MarketCurves base_market = single_market(0.15);
  Preferences base_prefs{2.0, 0.5, 1.0};
  std::optional<CoefficientTable> base;
  std::optional<SimResult> mc;
};

SimConfig mc_config() {
  SimConfig c;
  c.num_paths = 100000;
  c.seed = 42;
  c.start_wealth = 4.0;
  c.measure = Measure::Distorted;
  c.workers = default_workers();
  return c;
}

Outcome terminal_exactness(Shared& s) {
  Outcome o;
  double worst = 0.0;
  std::size_t failed = 0;
  for (const Draw& d : s.draws.accepted) {
    try {
      const CoefficientTable t = solve_system(d.market, d.prefs, ModelVariant::Full);
      const std::size_t last = t.size() - 1;
      worst = std::max(worst, std::abs(t.f[last] * d.prefs.gamma0 - 1.0));
      for (const auto* v : {&t.h1, &t.h2, &t.h3, &t.g1, &t.k1}) worst = std::max(worst, std::abs((*v)[last] - 1.0));
    } catch (const Error& e) {
      ++failed;
      o.part(false, "ODE route failed for " + describe(d) + ": " + e.what());
    }
  }
  o.pass = o.pass && failed == 0 && worst <= kMachine;
  o.detail = std::to_string(s.draws.accepted.size()) + " draws (" + std::to_string(s.draws.rejected) +
             " rejected), max_dev=" + num(worst);
  return o;
}

Outcome oracle_equivalence(Shared& s) {
  Outcome o;
  s.base = solve_system(s.base_market, s.base_prefs, ModelVariant::Full);
  const PicardResult pic = solve_f_picard(s.base_market, s.base_prefs);
  const double base_diff = sup_diff(pic.f, s.base->f);
  o.part(base_diff < 1e-6, "base sup_diff=" + num(base_diff) + " iterations=" + std::to_string(pic.iterations));
  double worst = 0.0;
  for (const Draw& d : s.draws.accepted) {
    try {
      const CoefficientTable t = solve_system(d.market, d.prefs, ModelVariant::Full);
      const PicardResult p = solve_f_picard(d.market, d.prefs);
      const double diff = sup_diff(p.f, t.f);
      worst = std::max(worst, diff);
      if (!(diff < 1e-6)) o.part(false, "sup_diff=" + num(diff) + " for " + describe(d));
    } catch (const Error& e) {
      o.part(false, std::string("one route failed for ") + describe(d) + ": " + e.what());
    }
  }
  o.part(worst < 1e-6, "draws max sup_diff=" + num(worst));
  o.detail = "base " + num(base_diff) + ", draws " + num(worst);
  return o;
}

Outcome closed_form(Shared& s) {
  Outcome o;
  const CoefficientTable& t = *s.base;
  const ClosedFormCoefficients cf = closed_form_coefficients(s.base_market, t);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    worst = std::max({worst, std::abs(cf.h2[i] / t.h2[i] - 1.0), std::abs(cf.h3[i] / t.h3[i] - 1.0),
                      std::abs(cf.g1[i] / t.g1[i] - 1.0)});
  }
  o.pass = worst < 1e-7;
  o.detail = "max_rel=" + num(worst);
  return o;
}

Outcome degenerate_market(Shared& s) {
  Outcome o;
  const MarketCurves m = single_market(0.05);
  const CoefficientTable t = solve_system(m, s.base_prefs, ModelVariant::Full);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    worst = std::max(worst, std::abs(t.f[i] - std::exp(-0.05 * (5.0 - t.grid.node(i))) / 2.0));
  }
  o.pass = worst < 1e-8;
  o.detail = "max_abs=" + num(worst);
  return o;
}

Outcome variant_limits(Shared& s) {
  Outcome o;
  const CoefficientTable near = solve_system(s.base_market, Preferences{2.0, 0.5, 1e-8}, ModelVariant::Full);
  const CoefficientTable neutral = solve_system(s.base_market, s.base_prefs, ModelVariant::AmbiguityNeutral);
  const double d1 = sup_diff(near.f, neutral.f);
  o.part(d1 < 1e-5, "Full(xi=1e-8) vs AmbiguityNeutral sup_diff=" + num(d1));
  const Preferences flat{2.0, 0.0, 1.0};
  const CoefficientTable full0 = solve_system(s.base_market, flat, ModelVariant::Full);
  const CoefficientTable noskew = solve_system(s.base_market, flat, ModelVariant::NoSkew);
  const double d2 = sup_diff(full0.f, noskew.f);
  o.part(d2 < 1e-10, "Full(phi0=0) vs NoSkew sup_diff=" + num(d2));
  o.detail = num(d1) + ", " + num(d2);
  return o;
}

Outcome h2_k1(Shared& s) {
  Outcome o;
  double worst = 0.0;
  auto scan = [&](const CoefficientTable& t) {
    for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t.h2[i] - t.k1[i]) / t.h2[i]);
  };
  scan(*s.base);
  for (const Draw& d : s.draws.accepted) {
    try {
      scan(solve_system(d.market, d.prefs, ModelVariant::Full));
    } catch (const Error&) {
    }
  }
  o.pass = worst <= kMachine;
  o.detail = "max_rel=" + num(worst);
  return o;
}

Outcome lognormal(Shared& s) {
  Outcome o;
  const CoefficientTable& t = *s.base;
  const double w = 4.0;
  const double expected[3] = {t.g1[0] * w, t.h2[0] * w * w, t.h3[0] * w * w * w};
  double worst = 0.0;
  for (int n = 1; n <= 3; ++n) {
    worst = std::max(worst, std::abs(lognormal_moments(t, s.base_market, 0.0, w, n) / expected[n - 1] - 1.0));
  }
  o.part(worst < 1e-7, "analytic orders 1-3 max_rel=" + num(worst));
  s.mc = simulate_equilibrium_wealth(t, s.base_market, mc_config());
  for (int n = 1; n <= 2; ++n) {
    const Estimate& e = s.mc->raw_moments[n - 1];
    const double z = (e.value - expected[n - 1]) / e.std_error;
    o.part(std::abs(z) <= 3.0, "MC order " + std::to_string(n) + " z=" + num(z));
  }
  o.detail = "max_rel=" + num(worst) + ", 1e5 paths";
  return o;
}

Outcome value_verification(Shared& s) {
  Outcome o;
  SimConfig none = mc_config();
  none.num_paths = 0;
  const ValueVerification vv = verify_value(*s.base, nullptr, s.base_market, 0.0, 4.0, none);
  o.part(vv.analytic_rel_error < 1e-6, "analytic rel_error=" + num(vv.analytic_rel_error) + " V(0,4)=" + num(vv.value));
  const double z = (s.mc->objective.value - vv.value) / s.mc->objective.std_error;
  o.part(std::abs(z) <= 3.0, "MC objective z=" + num(z));
  o.detail = "rel=" + num(vv.analytic_rel_error) + " z=" + num(z);
  return o;
}

Outcome delta3_positive(Shared& s) {
  Outcome o;
  const Delta3Report base = delta3_scan(*s.base);
  o.part(base.all_positive, "base min=" + num(base.min_value) + " at t=" + num(base.argmin_time));
  std::size_t cells = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (const SweepSpec& spec : figure_presets(RunConfig{})) {
    if (spec.name.substr(0, 5) > "fig11") continue;
    const auto rows = run_sweep(spec, default_workers());
    const std::size_t col = sweep_column(1, "min_delta3");
    bool ok = true;
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
      ++cells;
      const double v = r.values[col];
      ok = ok && v > 0.0;
      lo = std::min(lo, std::isfinite(v) ? v : -std::numeric_limits<double>::infinity());
    }
    lowest = std::min(lowest, lo);
    if (!ok) o.part(false, spec.name + " min=" + num(lo));
  }
  o.part(lowest > 0.0, "figure presets " + std::to_string(cells) + " cells, min=" + num(lowest));
  o.detail = "base min " + num(base.min_value) + ", presets min " + num(lowest);
  return o;
}

Outcome monotonicity(Shared&) {
  Outcome o;
  const RunConfig base;
  RunConfig low = base;
  apply_param(low, "mu", 0.10);
  const SweepAxis xi{"xi", 0.5, 3.0, 11};

  {
    const auto rows = sweep_axis(base, xi);
    o.part(strictly(column(rows, "u_star"), false), "u* decreasing in xi on [0.5, 3]" + first_failure(rows));
    o.part(strictly(column(rows, "L1"), false), "L1 decreasing in xi, range " + range(column(rows, "L1")));
  }
  {
    const auto rows = sweep_axis(base, SweepAxis{"gamma0", 1.0, 4.0, 13});
    o.part(strictly(column(rows, "u_star"), false), "u* decreasing in gamma0 on [1, 4]" + first_failure(rows));
  }
  {
    const auto rows = sweep_axis(base, SweepAxis{"mu", 0.10, 0.20, 11});
    o.part(strictly(column(rows, "u_star"), true), "u* increasing in mu on [0.10, 0.20]" + first_failure(rows));
    o.part(strictly(column(rows, "L1"), true), "L1 increasing in mu, range " + range(column(rows, "L1")));
  }
  {
    const auto rows = sweep_axis(base, SweepAxis{"w0", 1.0, 10.0, 10});
    o.part(strictly(column(rows, "u_star"), true), "u* increasing in w0 on [1, 10]" + first_failure(rows));
  }
  {
    std::vector<double> diff;
    std::string where;
    for (const SweepSpec& spec : figure_presets(base)) {
      if (spec.name.rfind("fig05", 0) != 0) continue;
      const auto rows = run_sweep(spec, default_workers());
      const auto us = column(rows, "u_star");
      const auto uh = column(rows, "u_hat");
      for (std::size_t i = 0; i < us.size(); ++i) diff.push_back(us[i] - uh[i]);
      where += first_failure(rows);
    }
    const bool ok = all_positive(diff);
    o.part(ok, "u* - u_hat > 0 on the fig05 grids, range " + range(diff) + (ok ? "" : where));
  }
  {
    const auto rows = sweep_axis(base, SweepAxis{"sigma", 0.15, 0.35, 11});
    o.part(strictly(column(rows, "L1"), false), "L1 decreasing in sigma, range " + range(column(rows, "L1")));
  }
  {
    const auto rows = sweep_axis(base, SweepAxis{"phi0", 0.0, 1.0, 11});
    o.part(strictly(column(rows, "L1"), true), "L1 increasing in phi0, range " + range(column(rows, "L1")));
  }
  {
    const auto rows = sweep_axis(low, xi);
    const auto l2 = column(rows, "L2");
    const auto l3 = column(rows, "L3");
    o.part(strictly(l2, true) && all_positive(l2), "mu=0.10: L2 positive and increasing in xi, range " + range(l2));
    o.part(strictly(l3, true) && all_positive(l3), "mu=0.10: L3 positive and increasing in xi, range " + range(l3));
    const auto us = column(rows, "u_star");
    const auto ub = column(rows, "u_bar");
    std::vector<double> diff;
    for (std::size_t i = 0; i < us.size(); ++i) diff.push_back(us[i] - ub[i]);
    o.part(all_positive(diff) && strictly(diff, false),
           "mu=0.10: u* - u_bar positive and decreasing in xi, range " + range(diff));
  }
  std::size_t failed = 0;
  for (const auto& p : o.parts) failed += p.first ? 0 : 1;
  o.detail = std::to_string(o.parts.size() - failed) + "/" + std::to_string(o.parts.size()) + " sub-checks";
  return o;
}

Outcome moment_bound(Shared& s) {
  Outcome o;
  SimConfig none = mc_config();
  none.num_paths = 0;
  const MomentBoundReport mb = moment_bound_check(*s.base, s.base_market, none);
  const double ratio = s.mc->sup_fourth_moment / mb.analytic_sup;
  o.part(mb.finite, "analytic sup E[W^4]=" + num(mb.analytic_sup) + " at t=" + num(mb.analytic_argmax_time));
  o.part(ratio >= 0.8 && ratio <= 1.25, "MC/analytic ratio=" + num(ratio));
  o.detail = "ratio=" + num(ratio);
  return o;
}

Outcome determinism(Shared&) {
  Outcome o;
  RunConfig cfg;
  cfg.simulation.num_paths = 20000;
  const SweepSpec spec = figure_presets(cfg).front();
  const std::size_t many = std::max<std::size_t>(4, default_workers());

  const std::string sweep1 = sweep_csv(spec, run_sweep(spec, 1));
  const std::string sweepN = sweep_csv(spec, run_sweep(spec, many));
  const std::string sweepN2 = sweep_csv(spec, run_sweep(spec, many));
  o.part(sweep1 == sweepN && sweepN == sweepN2, "sweep CSV identical for 1 and " + std::to_string(many) + " workers");

  const std::string sim1 = simulation_csv(cfg, 1);
  const std::string sim3 = simulation_csv(cfg, 3);
  const std::string simN = simulation_csv(cfg, many);
  const std::string simN2 = simulation_csv(cfg, many);
  o.part(sim1 == sim3 && sim3 == simN && simN == simN2, "simulation CSV identical across worker counts and runs");

  const MarketCurves m = build_market(cfg.market_spec());
  const std::string c1 = coefficients_csv(solve_system(m, cfg.prefs, ModelVariant::Full));
  const std::string c2 = coefficients_csv(solve_system(m, cfg.prefs, ModelVariant::Full));
  o.part(c1 == c2, "coefficient CSV identical across runs");
  o.detail = std::to_string(sweep1.size() + sim1.size() + c1.size()) + " bytes compared";
  return o;
}

struct Criterion {
  const char* id;
  const char* name;
  double budget_s;
  std::function<Outcome(Shared&)> run;
};

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  Shared shared;
  {
    const auto t0 = clock::now();
    shared.draws = make_draws(20);
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    std::printf("SETUP random draws: %zu accepted, %zu rejected (%.2f s)\n", shared.draws.accepted.size(),
                shared.draws.rejected, dt);
  }

  const std::vector<Criterion> criteria = {
      {"C01", "terminal_exactness", 1.0, terminal_exactness},
      {"C02", "oracle_equivalence", 10.0, oracle_equivalence},
      {"C03", "closed_form_consistency", 1.0, closed_form},
      {"C04", "degenerate_market", 1.0, degenerate_market},
      {"C05", "variant_limits", 2.0, variant_limits},
      {"C06", "h2_k1_identity", 1.0, h2_k1},
      {"C07", "lognormal_oracle", 30.0, lognormal},
      {"C08", "value_verification", 30.0, value_verification},
      {"C09", "delta3_positivity", 20.0, delta3_positive},
      {"C10", "figure_monotonicity", 60.0, monotonicity},
      {"C11", "moment_bound", 30.0, moment_bound},
      {"C12", "determinism", 60.0, determinism},
  };

  std::size_t failures = 0;
  double total = 0.0;
  for (const Criterion& c : criteria) {
    const auto t0 = clock::now();
    Outcome o;
    try {
      o = c.run(shared);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    total += dt;
    const bool in_budget = dt <= c.budget_s;
    const bool pass = o.pass && in_budget;
    failures += pass ? 0 : 1;
    std::printf("%s %s %s (%.2f s of %.0f s) %s\n", pass ? "PASS" : "FAIL", c.id, c.name, dt, c.budget_s,
                o.detail.c_str());
    for (const auto& [ok, text] : o.parts) std::printf("    %s %s\n", ok ? "ok  " : "FAIL", text.c_str());
    if (!in_budget) std::printf("    FAIL runtime over budget\n");
    std::fflush(stdout);
  }
  std::printf("SUMMARY %zu/%zu criteria passed (%.1f s)\n", criteria.size() - failures, criteria.size(), total);
  return failures == 0 ? 0 : 1;
}
