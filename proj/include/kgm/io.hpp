#pragma once

// Run configuration (flat key=value text), field dumps and the JSON summary.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgm/continuation.hpp"
#include "kgm/oracle.hpp"
#include "kgm/verify.hpp"

namespace kgm {

using Json = nlohmann::ordered_json;

/// Every recognised key with its default, in documentation order.
inline const std::vector<std::pair<std::string, std::string>>& config_defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      {"grid.nr", "40"},         {"grid.nz", "80"},         {"grid.R", "10"},
      {"grid.L", "10"},          {"phys.m", "1"},           {"phys.omega", "0.5"},
      {"phys.q", "0.5"},         {"phys.ell", "1"},         {"phys.mu", "1"},
      {"nl.terms", "1:3"},       {"nl.sigma", "0"},         {"lin.tol", "1e-10"},
      {"solve.route", "auto"},   {"solve.max_iter", "400"}, {"solve.grad_tol", "1e-6"},
      {"solve.nehari_tol", "1e-8"}, {"solve.initial_step", "1"}, {"solve.max_step", "4"},
      {"solve.backtrack", "0.5"}, {"solve.armijo", "1e-4"},  {"solve.recentre", "true"},
      {"solve.seed_width", "1"}, {"solve.seed_shift", "0"}, {"solve.perturbation", "0"},
      {"solve.seed", "0"},       {"solve.initial", ""},     {"sweep.schedule", "default"},
      {"sweep.cold_check", "false"}, {"verify.probes", "20"}, {"verify.probe_seed", "1"},
      {"verify.oracle_n", "17,33"}, {"verify.oracle_extent", "6"}, {"verify.oracle_width", "1.5"},
      {"fiber.tmin", "0.05"},    {"fiber.tmax", "100"},       {"fiber.points", "60"},
      {"output.dir", "kgm-out"}, {"output.svg", "false"},   {"output.wall_clock", "false"},
  };
  return d;
}

struct RunConfig {
  CylGrid grid;
  PhysParams phys;
  Nonlinearity nl;
  LinearSolveOptions lin;
  SolveOptions solve;
  std::string route = "auto";
  std::string initial_field;
  std::vector<double> schedule;
  bool cold_check = false;
  int probes = 20;
  std::uint64_t probe_seed = 1;
  std::vector<int> oracle_n;
  double oracle_extent = 6.0, oracle_width = 1.5;
  double fiber_tmin = 0.05, fiber_tmax = 100.0;
  int fiber_points = 60;
  std::string output_dir;
  bool svg = false, wall_clock = false;
  std::map<std::string, std::string> raw;  // the resolved key=value table
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
  }
}

inline long to_long(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x)) throw ConfigError("config key " + key + ": expected an integer, got '" + v + "'");
  return static_cast<long>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key " + key + ": expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Parses "key = value" lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": missing '='");
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Applies defaults, then `kv`; unknown keys are rejected. Validates the
/// physical parameters before returning.
inline RunConfig build_config(const std::map<std::string, std::string>& kv) {
  std::map<std::string, std::string> r;
  for (const auto& [k, v] : config_defaults()) r[k] = v;
  for (const auto& [k, v] : kv) {
    if (!r.count(k)) throw ConfigError("unknown config key '" + k + "'");
    r[k] = v;
  }
  using namespace detail;
  RunConfig c;
  c.raw = r;
  const long nr = to_long("grid.nr", r["grid.nr"]), nz = to_long("grid.nz", r["grid.nz"]);
  c.grid = CylGrid(static_cast<int>(nr), static_cast<int>(nz), to_double("grid.R", r["grid.R"]),
                   to_double("grid.L", r["grid.L"]));
  c.phys.m = to_double("phys.m", r["phys.m"]);
  c.phys.omega = to_double("phys.omega", r["phys.omega"]);
  c.phys.q = to_double("phys.q", r["phys.q"]);
  c.phys.ell = static_cast<int>(to_long("phys.ell", r["phys.ell"]));
  c.phys.mu = to_double("phys.mu", r["phys.mu"]);
  validate(c.phys);

  std::vector<Nonlinearity::Term> terms;
  for (const auto& t : split(r["nl.terms"], ',')) {
    const auto parts = split(t, ':');
    if (parts.size() != 2) throw ConfigError("nl.terms entries must be coeff:exponent, got '" + t + "'");
    terms.push_back({to_double("nl.terms", parts[0]), to_double("nl.terms", parts[1])});
  }
  c.nl = Nonlinearity(terms, to_double("nl.sigma", r["nl.sigma"]));

  c.lin.tol = to_double("lin.tol", r["lin.tol"]);
  c.route = r["solve.route"];
  if (c.route != "auto" && c.route != "theorem1" && c.route != "theorem2")
    throw ConfigError("solve.route must be auto, theorem1 or theorem2");
  auto& s = c.solve;
  s.max_iter = static_cast<int>(to_long("solve.max_iter", r["solve.max_iter"]));
  s.grad_tol = to_double("solve.grad_tol", r["solve.grad_tol"]);
  s.nehari_tol = to_double("solve.nehari_tol", r["solve.nehari_tol"]);
  s.initial_step = to_double("solve.initial_step", r["solve.initial_step"]);
  s.max_step = to_double("solve.max_step", r["solve.max_step"]);
  s.backtrack = to_double("solve.backtrack", r["solve.backtrack"]);
  s.armijo = to_double("solve.armijo", r["solve.armijo"]);
  s.recentre = to_bool("solve.recentre", r["solve.recentre"]);
  s.seed.width = to_double("solve.seed_width", r["solve.seed_width"]);
  s.seed.z_shift = to_double("solve.seed_shift", r["solve.seed_shift"]);
  s.seed.perturbation = to_double("solve.perturbation", r["solve.perturbation"]);
  s.seed.seed = static_cast<std::uint64_t>(to_long("solve.seed", r["solve.seed"]));
  validate(s);
  c.initial_field = r["solve.initial"];

  if (r["sweep.schedule"] == "default") {
    c.schedule = default_mu_schedule();
  } else {
    for (const auto& x : split(r["sweep.schedule"], ',')) c.schedule.push_back(to_double("sweep.schedule", x));
  }
  validate_schedule(c.schedule);
  c.cold_check = to_bool("sweep.cold_check", r["sweep.cold_check"]);
  c.probes = static_cast<int>(to_long("verify.probes", r["verify.probes"]));
  c.probe_seed = static_cast<std::uint64_t>(to_long("verify.probe_seed", r["verify.probe_seed"]));
  for (const auto& x : split(r["verify.oracle_n"], ','))
    c.oracle_n.push_back(static_cast<int>(to_long("verify.oracle_n", x)));
  for (std::size_t k = 0; k < c.oracle_n.size(); ++k) {
    const int n = c.oracle_n[k];
    if (n < 3 || n > 33 || n % 2 == 0) throw ConfigError("verify.oracle_n entries must be odd and in [3,33]");
    if (k > 0 && n <= c.oracle_n[k - 1]) throw ConfigError("verify.oracle_n must be increasing");
  }
  if (c.probes < 0) throw ConfigError("verify.probes must be nonnegative");
  c.oracle_extent = to_double("verify.oracle_extent", r["verify.oracle_extent"]);
  c.oracle_width = to_double("verify.oracle_width", r["verify.oracle_width"]);
  c.fiber_tmin = to_double("fiber.tmin", r["fiber.tmin"]);
  c.fiber_tmax = to_double("fiber.tmax", r["fiber.tmax"]);
  c.fiber_points = static_cast<int>(to_long("fiber.points", r["fiber.points"]));
  if (!(c.fiber_tmin > 0.0 && c.fiber_tmax > c.fiber_tmin && c.fiber_points >= 2))
    throw ConfigError("fiber scan needs 0 < tmin < tmax and at least 2 points");
  c.output_dir = r["output.dir"];
  c.svg = to_bool("output.svg", r["output.svg"]);
  c.wall_clock = to_bool("output.wall_clock", r["output.wall_clock"]);
  return c;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  auto kv = path.empty() ? std::map<std::string, std::string>{} : parse_config_text(read_text_file(path));
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    kv[detail::trim(o.substr(0, eq))] = detail::trim(o.substr(eq + 1));
  }
  return build_config(kv);
}

/// "CYLFIELD v1", "Nr Nz R L", then one line of Nr values per z row.
inline std::string format_field(const CylGrid& g, std::span<const double> f) {
  check_size(g, f);
  std::string s = "CYLFIELD v1\n";
  s += std::to_string(g.nr()) + " " + std::to_string(g.nz()) + " " + detail::format_double(g.R()) + " " +
       detail::format_double(g.L()) + "\n";
  for (int j = 0; j < g.nz(); ++j) {
    for (int i = 0; i < g.nr(); ++i) {
      if (i) s += ' ';
      s += detail::format_double(f[g.index(i, j)]);
    }
    s += '\n';
  }
  return s;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

inline void write_field(const std::filesystem::path& path, const CylGrid& g, std::span<const double> f) {
  write_text_file(path, format_field(g, f));
}

inline std::pair<CylGrid, ScalarField> parse_field(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  std::getline(in, magic);
  if (detail::trim(magic) != "CYLFIELD v1") throw ConfigError("not a CYLFIELD v1 dump");
  int nr = 0, nz = 0;
  double R = 0, L = 0;
  if (!(in >> nr >> nz >> R >> L)) throw ConfigError("bad CYLFIELD header");
  CylGrid g(nr, nz, R, L);
  ScalarField f(g.size());
  for (auto& x : f)
    if (!(in >> x)) throw ConfigError("CYLFIELD dump is truncated");
  return {g, f};
}

inline std::pair<CylGrid, ScalarField> read_field(const std::string& path) { return parse_field(read_text_file(path)); }

/// Static heatmap, r to the right and z upward.
inline std::string field_svg(const CylGrid& g, std::span<const double> f, const std::string& title) {
  const int cell = 4;
  const double lo = *std::min_element(f.begin(), f.end()), hi = *std::max_element(f.begin(), f.end());
  const double span = hi > lo ? hi - lo : 1.0;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << g.nr() * cell << "\" height=\"" << g.nz() * cell + 16
    << "\">\n<text x=\"2\" y=\"12\" font-size=\"11\">" << title << " [" << detail::format_double(lo) << ", "
    << detail::format_double(hi) << "]</text>\n";
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) {
      const double t = (f[g.index(i, j)] - lo) / span;
      const int rr = static_cast<int>(255 * std::clamp(1.5 * t, 0.0, 1.0));
      const int gg = static_cast<int>(255 * std::clamp(1.5 * t - 0.5, 0.0, 1.0));
      const int bb = static_cast<int>(255 * std::clamp(0.5 - t, 0.0, 1.0) * 2.0);
      s << "<rect x=\"" << i * cell << "\" y=\"" << (g.nz() - 1 - j) * cell + 16 << "\" width=\"" << cell
        << "\" height=\"" << cell << "\" fill=\"rgb(" << rr << "," << gg << "," << bb << ")\"/>\n";
    }
  s << "</svg>\n";
  return s.str();
}

inline Json config_json(const RunConfig& c) {
  Json j = Json::object();
  for (const auto& [k, v] : c.raw) j[k] = v;
  return j;
}

inline Json params_json(const RunConfig& c) {
  Json terms = Json::array();
  for (const auto& t : c.nl.terms()) terms.push_back({{"coeff", t.coeff}, {"exponent", t.exponent}});
  return {{"m", c.phys.m},     {"omega", c.phys.omega}, {"q", c.phys.q},
          {"ell", c.phys.ell}, {"mu", c.phys.mu},       {"nonlinearity", terms},
          {"sigma", c.nl.sigma()}};
}

inline Json grid_json(const CylGrid& g) {
  return {{"nr", g.nr()}, {"nz", g.nz()}, {"R", g.R()}, {"L", g.L()}, {"dr", g.dr()}, {"dz", g.dz()}};
}

inline Json energy_json(const EnergyBreakdown& e) {
  return {{"kinetic", e.kinetic},   {"mass", e.mass},           {"vortex", e.vortex},
          {"electrostatic", e.electrostatic}, {"gauge", e.gauge}, {"potential", e.potential},
          {"total", e.total}};
}

inline Json nehari_json(const GroundState& gs) {
  return {{"N", gs.nehari.N},
          {"N_relative", gs.h1_norm_sq > 0 ? std::abs(gs.nehari.N) / gs.h1_norm_sq : 0.0},
          {"Nsecond", gs.nehari.Nsecond},
          {"grad_dual", gs.nehari.grad_dual},
          {"m_residual_u", gs.nehari.m_residual_u},
          {"m_residual_a", gs.nehari.m_residual_a},
          {"multi_root_events", gs.multi_root_events}};
}

inline Json residuals_json(const PdeResiduals& r) { return {{"u", r.u}, {"phi", r.phi}, {"a", r.a}}; }

inline Json history_json(const std::vector<IterationRecord>& h) {
  Json a = Json::array();
  for (const auto& r : h)
    a.push_back({{"energy", r.energy}, {"grad", r.grad_rel}, {"nehari", r.nehari_rel}, {"step", r.step},
                 {"backtracks", r.backtracks}});
  return a;
}

inline Json timings_json(const WorkCounter& w, std::optional<double> wall_seconds) {
  Json j = {{"linear_solves", w.solves.load()}, {"cg_iterations", w.cg_iterations.load()}};
  if (wall_seconds) j["wall_seconds"] = *wall_seconds;
  return j;
}

inline Json ground_state_summary(const RunConfig& c, const Problem& pr, const GroundState& gs,
                                 std::optional<double> wall_seconds) {
  Json j;
  j["config"] = config_json(c);
  j["params"] = params_json(c);
  j["grid"] = grid_json(pr.grid);
  j["route"] = route_name(gs.route);
  j["converged"] = gs.converged;
  j["stalled"] = gs.stalled;
  j["iterations"] = gs.iterations;
  j["energy_breakdown"] = energy_json(gs.energy);
  j["nehari"] = nehari_json(gs);
  j["residuals"] = residuals_json(gs.residuals);
  j["history"] = history_json(gs.history);
  j["timings"] = timings_json(*pr.work, wall_seconds);
  return j;
}

inline Json invariants_json(const std::vector<InvariantResult>& rs) {
  Json a = Json::array();
  for (const auto& r : rs)
    a.push_back({{"name", r.name},
                 {"reference", r.reference},
                 {"kind", kind_name(r.kind)},
                 {"measured", r.measured},
                 {"threshold", r.threshold},
                 {"pass", r.pass},
                 {"skipped", r.skipped}});
  return a;
}

inline Json continuation_json(const ContinuationReport& rep) {
  Json e = Json::array();
  for (const auto& x : rep.entries)
    e.push_back({{"mu", x.mu},
                 {"energy", x.energy},
                 {"l2_norm", x.l2_norm},
                 {"lp_norm", x.lp_norm},
                 {"energy_at_reference", x.energy_at_reference},
                 {"residuals", residuals_json(x.residuals)},
                 {"nehari_relative", x.nehari_rel},
                 {"Nsecond", x.nsecond},
                 {"iterations", x.iterations},
                 {"converged", x.converged},
                 {"cold_restart", x.cold_restart}});
  Json d = Json::array();
  for (const auto& x : rep.diffs) d.push_back({{"h1", x.h1}, {"phi", x.phi}, {"a", x.a}});
  Json j = {{"schedule", rep.schedule}, {"entries", e},       {"diffs", d},
            {"energy_cap", rep.energy_cap}, {"bounded", rep.bounded}};
  if (rep.cold_checked) j["cold_terminal_energy"] = rep.cold_terminal_energy;
  return j;
}

inline Json oracle_json(int n, const OracleReport& rep) {
  Json terms = Json::object();
  for (std::size_t t = 0; t < rep.cyl.size(); ++t)
    terms[action_term_names()[t]] = {{"cylindrical", rep.cyl[t]}, {"cartesian", rep.cart[t]},
                                     {"relative_error", rep.rel_err[t]}};
  return {{"intervals", n},
          {"terms", terms},
          {"max_relative_error", rep.max_rel_err},
          {"div_relative", rep.div_rel},
          {"phi_bound_slack", rep.phi_bound_slack}};
}

}  // namespace kgm
