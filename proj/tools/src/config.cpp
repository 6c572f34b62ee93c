#include "mvs/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace mvs::cli {

namespace pt = boost::property_tree;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::vector<double> SweepAxis::values() const {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = count == 1 ? min : min + (max - min) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  if (count > 1) out.back() = max;
  return out;
}

MarketSpec RunConfig::market_spec() const {
  const Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(market.mu.data(), static_cast<Eigen::Index>(market.mu.size()));
  return MarketSpec::constant(market.horizon, solver.num_steps, market.risk_free, mu, market.sigma);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ConfigError(where + ": " + what); }

double parse_real(const std::string& where, std::string_view text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
    fail(where, "expected a finite number, got '" + t + "'");
  }
  return v;
}

template <class Int>
Int parse_int(const std::string& where, std::string_view text) {
  const std::string t = trim(text);
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    fail(where, "expected a nonnegative integer, got '" + t + "'");
  }
  return v;
}

std::vector<double> parse_list(const std::string& where, std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_real(where, item));
  return out;
}

Eigen::MatrixXd parse_sigma(const std::string& where, std::string_view text, std::size_t num_assets) {
  if (text.find(';') != std::string_view::npos) {
    const auto rows = split(text, ';');
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto row = parse_list(where, rows[i]);
      if (row.size() != rows.size()) fail(where, "sigma matrix must be square with one row per asset");
      for (std::size_t j = 0; j < row.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    return m;
  }
  const auto diag = parse_list(where, text);
  if (diag.size() != num_assets) fail(where, "sigma list needs one volatility per asset (use ';' rows for a matrix)");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(diag.size()), static_cast<Eigen::Index>(diag.size()));
  for (std::size_t i = 0; i < diag.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag[i];
  return m;
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"market", {"T", "r", "mu", "sigma"}},
      {"preferences", {"gamma0", "phi0", "xi"}},
      {"solver", {"num_steps", "picard_tol", "picard_max_iter", "eps_den", "variants"}},
      {"simulation", {"num_paths", "seed", "scheme", "measure", "w0", "t0", "euler_substeps"}},
      {"sweep", {"param", "min", "max", "count", "param2", "min2", "max2", "count2", "preset"}},
  };
  return s;
}

bool is_sweep_param(const std::string& name) {
  return std::find(std::begin(kSweepParams), std::end(kSweepParams), name) != std::end(kSweepParams);
}

SweepAxis parse_axis(const pt::ptree& sec, const std::string& origin, const std::string& suffix) {
  SweepAxis axis;
  const std::string where = origin + " [sweep]";
  axis.param = trim(sec.get<std::string>("param" + suffix));
  if (!is_sweep_param(axis.param)) fail(where, "cannot sweep over '" + axis.param + "'");
  for (const char* key : {"min", "max", "count"}) {
    if (!sec.get_child_optional(key + suffix)) fail(where, std::string("param") + suffix + " needs " + key + suffix);
  }
  axis.min = parse_real(where + " min" + suffix, sec.get<std::string>("min" + suffix));
  axis.max = parse_real(where + " max" + suffix, sec.get<std::string>("max" + suffix));
  axis.count = parse_int<std::size_t>(where + " count" + suffix, sec.get<std::string>("count" + suffix));
  if (axis.count == 0) fail(where, "count" + suffix + " must be positive");
  if (axis.max < axis.min) fail(where, "max" + suffix + " is below min" + suffix);
  return axis;
}

void validate(const RunConfig& cfg, const std::string& origin) {
  if (cfg.solver.num_steps == 0) fail(origin + " [solver]", "num_steps must be positive");
  if (!(cfg.solver.picard_tol > 0.0)) fail(origin + " [solver]", "picard_tol must be positive");
  if (cfg.solver.picard_max_iter == 0) fail(origin + " [solver]", "picard_max_iter must be positive");
  if (!(cfg.solver.eps_den >= 0.0)) fail(origin + " [solver]", "eps_den must be nonnegative");
  if (cfg.solver.variants.empty()) fail(origin + " [solver]", "variants must name at least one model variant");
  try {
    const MarketCurves market = build_market(cfg.market_spec());
    cfg.prefs.validate();
    cfg.simulation.validate();
    if (market.grid().node_index(cfg.simulation.start_time) >= market.grid().size() ||
        !(cfg.simulation.start_time < cfg.market.horizon)) {
      fail(origin + " [simulation]", "t0 must be a grid node before T");
    }
  } catch (const Error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  for (const auto* axis : {&cfg.sweep.first, &cfg.sweep.second}) {
    if (*axis && cfg.market.mu.size() != 1 && ((*axis)->param == "mu" || (*axis)->param == "sigma")) {
      fail(origin + " [sweep]", "mu and sigma sweeps need a single risky asset");
    }
  }
  if (cfg.sweep.first && cfg.sweep.second && cfg.sweep.first->param == cfg.sweep.second->param) {
    fail(origin + " [sweep]", "param and param2 must differ");
  }
}

}  // namespace

void apply_param(RunConfig& cfg, const std::string& name, double value) {
  if (name == "xi") cfg.prefs.xi = value;
  else if (name == "gamma0") cfg.prefs.gamma0 = value;
  else if (name == "phi0") cfg.prefs.phi0 = value;
  else if (name == "mu") std::fill(cfg.market.mu.begin(), cfg.market.mu.end(), value);
  else if (name == "sigma") cfg.market.sigma = Eigen::MatrixXd::Constant(1, 1, value);
  else if (name == "r") cfg.market.risk_free = value;
  else if (name == "T") cfg.market.horizon = value;
  else if (name == "w0") cfg.simulation.start_wealth = value;
  else throw ConfigError("unknown sweep parameter '" + name + "'");
}

RunConfig parse_config(std::istream& in, const std::string& origin) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  std::set<std::string> seen;
  for (const auto& [name, sec] : tree) {
    const auto it = schema().find(name);
    if (it == schema().end() || !sec.data().empty()) fail(origin, "unknown section or top-level key '" + name + "'");
    if (!seen.insert(name).second) fail(origin, "duplicate section [" + name + "]");
    for (const auto& [key, value] : sec) {
      if (!it->second.count(key)) fail(origin + " [" + name + "]", "unknown key '" + key + "'");
      (void)value;
    }
  }

  RunConfig cfg;
  auto get = [&](const char* section, const char* key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(std::string(section) + "/" + key, '/'))) {
      return *v;
    }
    return std::nullopt;
  };
  auto where = [&](const char* section, const char* key) { return origin + " [" + section + "] " + key; };

  if (auto v = get("market", "T")) cfg.market.horizon = parse_real(where("market", "T"), *v);
  if (auto v = get("market", "r")) cfg.market.risk_free = parse_real(where("market", "r"), *v);
  if (auto v = get("market", "mu")) cfg.market.mu = parse_list(where("market", "mu"), *v);
  if (auto v = get("market", "sigma")) {
    cfg.market.sigma = parse_sigma(where("market", "sigma"), *v, cfg.market.mu.size());
  } else if (cfg.market.mu.size() != 1) {
    fail(where("market", "sigma"), "required when mu lists more than one asset");
  }
  if (static_cast<std::size_t>(cfg.market.sigma.rows()) != cfg.market.mu.size()) {
    fail(where("market", "sigma"), "dimension does not match mu");
  }

  if (auto v = get("preferences", "gamma0")) cfg.prefs.gamma0 = parse_real(where("preferences", "gamma0"), *v);
  if (auto v = get("preferences", "phi0")) cfg.prefs.phi0 = parse_real(where("preferences", "phi0"), *v);
  if (auto v = get("preferences", "xi")) cfg.prefs.xi = parse_real(where("preferences", "xi"), *v);

  if (auto v = get("solver", "num_steps")) cfg.solver.num_steps = parse_int<std::size_t>(where("solver", "num_steps"), *v);
  if (auto v = get("solver", "picard_tol")) cfg.solver.picard_tol = parse_real(where("solver", "picard_tol"), *v);
  if (auto v = get("solver", "picard_max_iter")) {
    cfg.solver.picard_max_iter = parse_int<std::size_t>(where("solver", "picard_max_iter"), *v);
  }
  if (auto v = get("solver", "eps_den")) cfg.solver.eps_den = parse_real(where("solver", "eps_den"), *v);
  if (auto v = get("solver", "variants")) {
    cfg.solver.variants.clear();
    for (const auto& name : split(*v, ',')) {
      try {
        const ModelVariant variant = parse_variant(name);
        if (std::find(cfg.solver.variants.begin(), cfg.solver.variants.end(), variant) != cfg.solver.variants.end()) {
          fail(where("solver", "variants"), "variant '" + name + "' listed twice");
        }
        cfg.solver.variants.push_back(variant);
      } catch (const Error& e) {
        fail(where("solver", "variants"), e.what());
      }
    }
  }

  SimConfig& sim = cfg.simulation;
  if (auto v = get("simulation", "num_paths")) sim.num_paths = parse_int<std::size_t>(where("simulation", "num_paths"), *v);
  if (auto v = get("simulation", "seed")) sim.seed = parse_int<std::uint64_t>(where("simulation", "seed"), *v);
  if (auto v = get("simulation", "w0")) sim.start_wealth = parse_real(where("simulation", "w0"), *v);
  if (auto v = get("simulation", "t0")) sim.start_time = parse_real(where("simulation", "t0"), *v);
  if (auto v = get("simulation", "euler_substeps")) {
    sim.euler_substeps = parse_int<std::size_t>(where("simulation", "euler_substeps"), *v);
  }
  try {
    if (auto v = get("simulation", "scheme")) sim.scheme = parse_scheme(trim(*v));
    if (auto v = get("simulation", "measure")) sim.measure = parse_measure(trim(*v));
  } catch (const Error& e) {
    fail(origin + " [simulation]", e.what());
  }

  if (const auto sec = tree.get_child_optional("sweep")) {
    if (sec->get_child_optional("param")) cfg.sweep.first = parse_axis(*sec, origin, "");
    if (sec->get_child_optional("param2")) {
      if (!cfg.sweep.first) fail(origin + " [sweep]", "param2 requires param");
      cfg.sweep.second = parse_axis(*sec, origin, "2");
    }
    for (const char* key : {"min", "max", "count"}) {
      if (!cfg.sweep.first && sec->get_child_optional(key)) fail(origin + " [sweep]", std::string(key) + " requires param");
      if (!cfg.sweep.second && sec->get_child_optional(std::string(key) + "2")) {
        fail(origin + " [sweep]", std::string(key) + "2 requires param2");
      }
    }
    if (auto v = sec->get_optional<std::string>("preset")) {
      cfg.sweep.preset = trim(*v);
      if (cfg.sweep.preset != "figures") fail(origin + " [sweep]", "unknown preset '" + cfg.sweep.preset + "'");
    }
  }

  validate(cfg, origin);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
    return s;
  };
  out << "[market]\n";
  out << "T = " << format_double(cfg.market.horizon) << "\n";
  out << "r = " << format_double(cfg.market.risk_free) << "\n";
  out << "mu = " << join(cfg.market.mu) << "\n";
  out << "sigma = ";
  for (Eigen::Index i = 0; i < cfg.market.sigma.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(cfg.market.sigma.cols()));
    for (Eigen::Index j = 0; j < cfg.market.sigma.cols(); ++j) row[static_cast<std::size_t>(j)] = cfg.market.sigma(i, j);
    out << (i ? "; " : "") << join(row);
  }
  out << "\n\n[preferences]\n";
  out << "gamma0 = " << format_double(cfg.prefs.gamma0) << "\n";
  out << "phi0 = " << format_double(cfg.prefs.phi0) << "\n";
  out << "xi = " << format_double(cfg.prefs.xi) << "\n";
  out << "\n[solver]\n";
  out << "num_steps = " << cfg.solver.num_steps << "\n";
  out << "picard_tol = " << format_double(cfg.solver.picard_tol) << "\n";
  out << "picard_max_iter = " << cfg.solver.picard_max_iter << "\n";
  out << "eps_den = " << format_double(cfg.solver.eps_den) << "\n";
  out << "variants = ";
  for (std::size_t i = 0; i < cfg.solver.variants.size(); ++i) out << (i ? ", " : "") << to_string(cfg.solver.variants[i]);
  out << "\n\n[simulation]\n";
  out << "num_paths = " << cfg.simulation.num_paths << "\n";
  out << "seed = " << cfg.simulation.seed << "\n";
  out << "scheme = " << to_string(cfg.simulation.scheme) << "\n";
  out << "measure = " << to_string(cfg.simulation.measure) << "\n";
  out << "w0 = " << format_double(cfg.simulation.start_wealth) << "\n";
  out << "t0 = " << format_double(cfg.simulation.start_time) << "\n";
  out << "euler_substeps = " << cfg.simulation.euler_substeps << "\n";
  if (cfg.sweep.first || !cfg.sweep.preset.empty()) {
    out << "\n[sweep]\n";
    auto axis = [&](const SweepAxis& a, const char* suffix) {
      out << "param" << suffix << " = " << a.param << "\n";
      out << "min" << suffix << " = " << format_double(a.min) << "\n";
      out << "max" << suffix << " = " << format_double(a.max) << "\n";
      out << "count" << suffix << " = " << a.count << "\n";
    };
    if (cfg.sweep.first) axis(*cfg.sweep.first, "");
    if (cfg.sweep.second) axis(*cfg.sweep.second, "2");
    if (!cfg.sweep.preset.empty()) out << "preset = " << cfg.sweep.preset << "\n";
  }
  return out.str();
}

}  // namespace mvs::cli
