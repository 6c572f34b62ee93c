#include "mvs/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "mvs/policy.hpp"
#include "mvs/simcheck.hpp"

#ifndef MVS_VERSION
#define MVS_VERSION "0.0.0"
#endif

namespace mvs::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_row(std::ostream& out, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << format_double(values[i]);
}

}  // namespace

std::string coefficients_csv(const CoefficientTable& table) {
  std::ostringstream out;
  out << "t,f,h1,h2,h3,g1,k1,delta3\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    write_row(out, {table.grid.node(i), table.f[i], table.h1[i], table.h2[i], table.h3[i], table.g1[i], table.k1[i],
                    table.delta3[i]});
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> sweep_value_columns(std::size_t num_assets) {
  std::vector<std::string> cols;
  auto per_asset = [&](const std::string& stem) {
    if (num_assets == 1) {
      cols.push_back(stem);
      return;
    }
    for (std::size_t k = 1; k <= num_assets; ++k) cols.push_back(stem + "_" + std::to_string(k));
  };
  for (const char* stem : {"u_star", "u_hat", "u_tilde", "u_bar", "q_star"}) per_asset(stem);
  for (const char* name : {"V", "V_hat", "V_tilde", "V_bar", "V1", "V2", "L1", "L2", "L3", "min_delta3"}) {
    cols.emplace_back(name);
  }
  return cols;
}

std::size_t sweep_column(std::size_t num_assets, const std::string& name) {
  const auto cols = sweep_value_columns(num_assets);
  const auto it = std::find(cols.begin(), cols.end(), name);
  if (it == cols.end()) throw std::out_of_range("no sweep column '" + name + "'");
  return static_cast<std::size_t>(it - cols.begin());
}

SweepRow evaluate_cell(const RunConfig& base, std::vector<double> params) {
  RunConfig cfg = base;
  const std::size_t m = cfg.market.mu.size();
  SweepRow row;
  row.values.assign(sweep_value_columns(m).size(), kNaN);
  row.params = std::move(params);

  auto note = [&](const Error& e) {
    if (row.status == "ok") row.status = std::string(to_string(e.code()));
  };
  try {
    const MarketCurves market = build_market(cfg.market_spec());
    const double t = cfg.simulation.start_time;
    const double w = cfg.simulation.start_wealth;
    const SolverOptions opts = cfg.solver_options();

    // u columns in order star, hat, tilde, bar, then q.
    const ModelVariant order[] = {ModelVariant::Full, ModelVariant::NoSkew, ModelVariant::AmbiguityNeutral,
                                  ModelVariant::Basic};
    std::optional<CoefficientTable> tables[4];
    for (std::size_t v = 0; v < 4; ++v) {
      try {
        tables[v] = solve_system(market, cfg.prefs, order[v], opts);
        const PolicyPoint p = equilibrium_policy(*tables[v], market, t, w);
        for (std::size_t k = 0; k < m; ++k) row.values[v * m + k] = p.allocation[static_cast<Eigen::Index>(k)];
        if (v == 0) {
          for (std::size_t k = 0; k < m; ++k) row.values[4 * m + k] = p.distortion[static_cast<Eigen::Index>(k)];
        }
      } catch (const Error& e) {
        note(e);
      }
    }
    std::optional<MispecTable> mispec[2];
    for (std::size_t k = 0; k < 2; ++k) {
      try {
        mispec[k] = solve_mispec_system(market, cfg.prefs, k == 0 ? MispecKind::IgnoreUncertainty : MispecKind::IgnoreBoth, opts);
      } catch (const Error& e) {
        note(e);
      }
    }

    const std::size_t base_col = 5 * m;
    auto coef_value = [&](const CoefficientTable& tab) {
      const CoefficientPoint c = coefficients_at(tab, t);
      return w * value_coefficient(c.h1, c.h2, c.h3, c.g1, tab.effective.gamma0, tab.effective.phi0);
    };
    auto mispec_value = [&](const MispecTable& tab) {
      const std::size_t i = tab.grid.node_index(t);
      return w * value_coefficient(tab.a1[i], tab.a2[i], tab.a3[i], tab.b1[i], tab.effective.gamma0, tab.effective.phi0);
    };
    // Values V, V_hat, V_tilde, V_bar share the u-column order.
    for (std::size_t v = 0; v < 4; ++v) {
      if (tables[v]) row.values[base_col + v] = coef_value(*tables[v]);
    }
    for (std::size_t k = 0; k < 2; ++k) {
      if (mispec[k]) row.values[base_col + 4 + k] = mispec_value(*mispec[k]);
    }
    const double value = row.values[base_col];
    if (value == 0.0) {
      note(Error(ErrorCode::ZeroDenominatorValue, "V(t,w) is zero"));
    } else {
      // NaN inputs propagate to NaN losses.
      row.values[base_col + 6] = 1.0 - row.values[base_col + 1] / value;
      row.values[base_col + 7] = 1.0 - row.values[base_col + 4] / value;
      row.values[base_col + 8] = 1.0 - row.values[base_col + 5] / value;
    }
    if (tables[0]) row.values[base_col + 9] = delta3_scan(*tables[0]).min_value;
  } catch (const Error& e) {
    note(e);
  }
  return row;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::size_t workers) {
  const std::vector<double> a = spec.first.values();
  const std::vector<double> b = spec.second ? spec.second->values() : std::vector<double>{kNaN};
  const std::size_t cells = a.size() * b.size();
  std::vector<SweepRow> rows(cells);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      RunConfig cfg = spec.base;
      std::vector<double> params{a[c / b.size()]};
      SweepRow row;
      try {
        apply_param(cfg, spec.first.param, params[0]);
        if (spec.second) {
          params.push_back(b[c % b.size()]);
          apply_param(cfg, spec.second->param, params[1]);
        }
        row = evaluate_cell(cfg, params);
      } catch (const ConfigError&) {
        row.params = params;
        row.status = "InvalidArgument";
        row.values.assign(sweep_value_columns(spec.base.market.mu.size()).size(), kNaN);
      }
      rows[c] = std::move(row);
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, cells));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return rows;
}

std::string sweep_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << spec.first.param;
  if (spec.second) out << ',' << spec.second->param;
  out << ",status";
  for (const auto& c : sweep_value_columns(spec.base.market.mu.size())) out << ',' << c;
  out << '\n';
  for (const SweepRow& row : rows) {
    write_row(out, row.params);
    out << ',' << row.status << ',';
    write_row(out, row.values);
    out << '\n';
  }
  return out.str();
}

std::vector<SweepSpec> figure_presets(const RunConfig& base) {
  const SweepAxis w0{"w0", 1.0, 10.0, 10};
  const SweepAxis xi{"xi", 0.5, 3.0, 11};
  const SweepAxis mu{"mu", 0.10, 0.20, 11};
  const SweepAxis gamma0{"gamma0", 1.5, 4.0, 11};
  const SweepAxis phi0{"phi0", 0.0, 1.0, 11};
  const SweepAxis sigma{"sigma", 0.15, 0.35, 11};
  const SweepAxis sigma_fine{"sigma", 0.15, 0.35, 21};
  const SweepAxis phi0_lines{"phi0", 0.25, 1.0, 4};

  RunConfig low = base;
  apply_param(low, "mu", 0.10);

  return {
      {"fig01_u_w0_xi", base, w0, xi},
      {"fig02_u_mu_gamma0", base, mu, gamma0},
      {"fig03_u_phi0_sigma", base, phi0, sigma},
      {"fig04a_uhat_w0_xi", base, w0, xi},
      {"fig04b_uhat_mu_gamma0", base, mu, gamma0},
      {"fig05a_udiff_w0_xi", base, w0, xi},
      {"fig05b_udiff_mu_gamma0", base, mu, gamma0},
      {"fig06_L1_w0_xi", base, w0, xi},
      {"fig07_L1_mu_gamma0", base, mu, gamma0},
      {"fig08_L1_phi0_sigma", base, phi0, sigma},
      {"fig09_L2_w0_xi", low, w0, xi},
      {"fig10_L2_mu_gamma0", low, mu, gamma0},
      {"fig11_L2_phi0_sigma", low, phi0, sigma},
      {"fig12_udiff_sigma_phi0", base, sigma_fine, phi0_lines},
      {"fig13_ubar_diff_w0_xi", low, w0, xi},
      {"fig14_L3_w0_xi", low, w0, xi},
  };
}

std::vector<CheckOutcome> run_checks(const RunConfig& cfg) {
  const MarketCurves market = build_market(cfg.market_spec());
  const TableSet set = solve_all(market, cfg.prefs, cfg.solver_options());
  const CoefficientTable& full = set.full;
  std::vector<CheckOutcome> out;
  auto add = [&](std::string name, bool pass, std::string detail) {
    out.push_back({std::move(name), pass, std::move(detail)});
  };
  auto sci = [](double v) { return format_double(v); };
  constexpr double kMachine = 4.0 * std::numeric_limits<double>::epsilon();

  {
    double worst = 0.0;
    for (const CoefficientTable* t : {&set.full, &set.neutral, &set.noskew, &set.basic}) {
      const std::size_t last = t->size() - 1;
      worst = std::max(worst, std::abs(t->f[last] * t->effective.gamma0 - 1.0));
      for (const auto* v : {&t->h1, &t->h2, &t->h3, &t->g1, &t->k1}) worst = std::max(worst, std::abs((*v)[last] - 1.0));
    }
    for (const MispecTable* t : {&set.ignore_uncertainty, &set.ignore_both}) {
      const std::size_t last = t->size() - 1;
      for (const auto* v : {&t->a1, &t->a2, &t->a3, &t->b1, &t->c1}) worst = std::max(worst, std::abs((*v)[last] - 1.0));
    }
    add("terminal_conditions", worst <= kMachine, "max_dev=" + sci(worst));
  }
  {
    const PicardResult pic = solve_f_picard(market, cfg.prefs, cfg.picard_options());
    double diff = 0.0;
    for (std::size_t i = 0; i < pic.f.size(); ++i) diff = std::max(diff, std::abs(pic.f[i] - full.f[i]));
    add("oracle_equivalence", diff < 1e-6,
        "sup_diff=" + sci(diff) + " iterations=" + std::to_string(pic.iterations));
  }
  {
    const ClosedFormCoefficients cf = closed_form_coefficients(market, full);
    double worst = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) {
      worst = std::max({worst, std::abs(cf.h2[i] / full.h2[i] - 1.0), std::abs(cf.h3[i] / full.h3[i] - 1.0),
                        std::abs(cf.g1[i] / full.g1[i] - 1.0)});
    }
    add("closed_form", worst < 1e-7, "max_rel=" + sci(worst));
  }
  {
    double worst = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) worst = std::max(worst, std::abs(full.h2[i] - full.k1[i]) / full.h2[i]);
    add("h2_k1_identity", worst <= kMachine, "max_rel=" + sci(worst));
  }

  const double t0 = cfg.simulation.start_time;
  const double w0 = cfg.simulation.start_wealth;
  const std::size_t i0 = full.grid.node_index(t0);
  const double expected[3] = {full.g1[i0] * w0, full.h2[i0] * w0 * w0, full.h3[i0] * w0 * w0 * w0};
  {
    double worst = 0.0;
    for (int n = 1; n <= 3; ++n) {
      worst = std::max(worst, std::abs(lognormal_moments(full, market, t0, w0, n) / expected[n - 1] - 1.0));
    }
    add("lognormal_analytic", worst < 1e-7, "max_rel=" + sci(worst));
  }

  SimConfig sim = cfg.simulation;
  sim.measure = Measure::Distorted;
  sim.workers = default_workers();
  const SimResult mc = simulate_equilibrium_wealth(full, market, sim);
  auto within = [](double est, double se, double target) {
    return std::abs(est - target) <= 3.0 * se + 1e-12 * std::abs(target);
  };
  {
    const bool ok1 = within(mc.raw_moments[0].value, mc.raw_moments[0].std_error, expected[0]);
    const bool ok2 = within(mc.raw_moments[1].value, mc.raw_moments[1].std_error, expected[1]);
    add("lognormal_mc", ok1 && ok2,
        "z1=" + sci((mc.raw_moments[0].value - expected[0]) / mc.raw_moments[0].std_error) +
            " z2=" + sci((mc.raw_moments[1].value - expected[1]) / mc.raw_moments[1].std_error));
  }
  {
    SimConfig none = sim;
    none.num_paths = 0;
    const ValueVerification vv = verify_value(full, nullptr, market, t0, w0, none);
    add("value_analytic", vv.analytic_pass, "rel=" + sci(vv.analytic_rel_error));
    add("value_mc", within(mc.objective.value, mc.objective.std_error, vv.value),
        "estimate=" + sci(mc.objective.value) + " se=" + sci(mc.objective.std_error) + " value=" + sci(vv.value));
  }
  {
    const Delta3Report d3 = delta3_scan(full);
    add("delta3_positive", d3.all_positive, "min=" + sci(d3.min_value) + " at_t=" + sci(d3.argmin_time));
  }
  {
    SimConfig none = sim;
    none.num_paths = 0;
    MomentBoundReport mb = moment_bound_check(full, market, none);
    mb.mc_sup = mc.sup_fourth_moment;
    mb.ratio = mb.mc_sup / mb.analytic_sup;
    const bool ok = mb.finite && mb.ratio >= 0.8 && mb.ratio <= 1.25;
    add("moment_bound", ok, "analytic_sup=" + sci(mb.analytic_sup) + " ratio=" + sci(mb.ratio));
  }
  return out;
}

std::string simulation_csv(const RunConfig& cfg, std::size_t workers) {
  const MarketCurves market = build_market(cfg.market_spec());
  const CoefficientTable full = solve_system(market, cfg.prefs, ModelVariant::Full, cfg.solver_options());
  const WealthLaw law = wealth_law(full, market);
  SimConfig sim = cfg.simulation;
  sim.workers = workers;
  const SimResult res = simulate_equilibrium_wealth(law, sim);
  const double t0 = sim.start_time;
  const double w0 = sim.start_wealth;
  const bool distorted = sim.measure == Measure::Distorted;

  double analytic[4];
  for (int n = 1; n <= 4; ++n) analytic[n - 1] = lognormal_moment(law, sim.measure, t0, w0, n);
  if (distorted) {
    const std::size_t i0 = full.grid.node_index(t0);
    analytic[0] = full.g1[i0] * w0;
    analytic[1] = full.h2[i0] * w0 * w0;
    analytic[2] = full.h3[i0] * w0 * w0 * w0;
  }

  std::ostringstream out;
  out << "quantity,estimate,std_error,analytic,z,pass\n";
  auto row = [&](const char* name, double est, double se, double ref) {
    const double diff = est - ref;
    double z = kNaN;
    bool pass = false;
    if (std::isfinite(ref) && std::isfinite(est)) {
      z = se > 0.0 ? diff / se : (std::abs(diff) <= 1e-12 * std::abs(ref) ? 0.0 : kNaN);
      pass = std::abs(diff) <= 3.0 * se + 1e-12 * std::abs(ref);
    }
    out << name << ',' << format_double(est) << ',' << format_double(se) << ',' << format_double(ref) << ','
        << format_double(z) << ',' << (pass ? "pass" : "fail") << '\n';
  };
  static const char* names[] = {"moment1", "moment2", "moment3", "moment4"};
  for (int n = 0; n < 4; ++n) row(names[n], res.raw_moments[n].value, res.raw_moments[n].std_error, analytic[n]);
  out << "variance," << format_double(res.variance) << ",nan," << format_double(analytic[1] - analytic[0] * analytic[0])
      << ",nan,info\n";
  out << "sup_fourth_moment," << format_double(res.sup_fourth_moment) << ",nan,nan,nan,info\n";
  out << "min_wealth," << format_double(res.min_wealth) << ",nan,nan,nan," << (res.min_wealth > 0.0 ? "pass" : "fail")
      << '\n';
  if (distorted) {
    SimConfig none = sim;
    none.num_paths = 0;
    const ValueVerification vv = verify_value(full, nullptr, market, t0, w0, none);
    row("penalty", res.penalty.value, res.penalty.std_error, vv.analytic_penalty);
    row("objective", res.objective.value, res.objective.std_error, vv.value);
  }
  return out.str();
}

std::string run_meta(const std::string& command, const RunConfig& cfg) {
  std::ostringstream out;
  out << "tool = mvs-robust " << MVS_VERSION << "\n";
  out << "command = " << command << "\n\n";
  out << render_config(cfg);
  return out.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

int dispatch(const std::string& command, const std::string& config_path, const std::string& out_dir,
             const std::string& preset, std::ostream& out) {
  RunConfig cfg = load_config(config_path);
  if (!preset.empty()) {
    if (preset != "figures") throw ConfigError("unknown preset '" + preset + "'");
    cfg.sweep.preset = preset;
  }
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "run.meta", run_meta(command, cfg));
  const std::size_t workers = default_workers();

  if (command == "solve") {
    const MarketCurves market = build_market(cfg.market_spec());
    for (ModelVariant v : cfg.solver.variants) {
      const CoefficientTable table = solve_system(market, cfg.prefs, v, cfg.solver_options());
      const auto name = "coefficients_" + std::string(to_string(v)) + ".csv";
      write_file(dir / name, coefficients_csv(table));
      out << "wrote " << (dir / name).string() << "\n";
    }
  } else if (command == "sweep") {
    std::vector<SweepSpec> specs;
    if (cfg.sweep.preset == "figures") {
      specs = figure_presets(cfg);
    } else if (cfg.sweep.first) {
      specs.push_back({"sweep", cfg, *cfg.sweep.first, cfg.sweep.second});
    } else {
      throw ConfigError(config_path + ": sweep needs a [sweep] section with param, min, max, count or a preset");
    }
    for (const SweepSpec& spec : specs) {
      const auto rows = run_sweep(spec, workers);
      const auto name = spec.name + ".csv";
      write_file(dir / name, sweep_csv(spec, rows));
      const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status != "ok"; });
      out << "wrote " << (dir / name).string() << " (" << rows.size() << " rows, " << failed << " failed)\n";
    }
  } else if (command == "check") {
    const auto checks = run_checks(cfg);
    bool all = true;
    for (const auto& c : checks) {
      out << "CHECK " << c.name << ' ' << (c.pass ? "PASS" : "FAIL") << ' ' << c.detail << '\n';
      all = all && c.pass;
    }
    return all ? kExitOk : kExitCheckFailed;
  } else if (command == "simulate") {
    write_file(dir / "simulation.csv", simulation_csv(cfg, workers));
    out << "wrote " << (dir / "simulation.csv").string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust time-consistent mean-variance-skewness equilibrium solver", "mvs-robust"};
  app.set_version_flag("--version", std::string(MVS_VERSION));
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = ".";
  std::string preset;
  const char* help[][2] = {{"solve", "Solve coefficient tables and write one CSV per variant"},
                           {"sweep", "Evaluate strategies, values and losses over a parameter grid"},
                           {"check", "Run the oracle checks for the configured parameters"},
                           {"simulate", "Monte Carlo simulation of the equilibrium wealth"}};
  for (const auto& [name, desc] : help) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--out", out_dir, "Output directory");
    if (std::string(name) == "sweep") sub->add_option("--preset", preset, "Built-in sweep set (figures)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << MVS_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, config_path, out_dir, preset, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolverError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolverError;
  }
}

}  // namespace mvs::cli
