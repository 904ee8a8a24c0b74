#pragma once

// Command-line driver: check-model | solve | sweep-mu | verify | fiber-scan.
// Exit codes: 0 success, 1 configuration error, 2 non-convergence,
// 3 invariant-suite failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kgm/io.hpp"

namespace kgm {

enum ExitCode { kOk = 0, kConfigError = 1, kNoConvergence = 2, kInvariantFailure = 3 };

inline constexpr const char* kOutputRootEnv = "KGM_OUTPUT_ROOT";

inline std::filesystem::path resolve_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  if (p.is_relative())
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) p = std::filesystem::path(root) / p;
  return p;
}

/// Picks the solver route; throws when the requested route is not admissible.
inline Route select_route(const std::string& requested, const AssumptionReport& rep) {
  if (requested == "theorem1") {
    if (!rep.nehari_route_ok) throw ConfigError("theorem1 route requested but its hypotheses fail");
    return Route::NehariMinimization;
  }
  if (requested == "theorem2") {
    if (!rep.mountain_pass_route_ok) throw ConfigError("theorem2 route requested but its hypotheses fail");
    return Route::MountainPass;
  }
  if (rep.route == Route::None) throw ConfigError("no admissible route for this model (see check-model)");
  return rep.route;
}

inline void print_assumptions(std::ostream& out, const AssumptionReport& r) {
  auto line = [&](const char* name, const HypothesisCheck& h) {
    out << "  " << name << ": " << (h.pass ? "pass" : "fail") << " (violation " << h.violation << ")\n";
  };
  out << "hypotheses\n";
  line("growth", r.growth);
  line("superlinear", r.superlinear);
  line("positivity", r.positivity);
  line("sigma_monotone", r.sigma_mono);
  line("cubic_monotone", r.cubic_mono);
  out << "admissibility_value " << r.admissibility_value << (r.admissible ? " (admissible)" : " (not admissible)")
      << "\n";
  out << "nehari_certificate " << r.nehari_certificate << "\n";
  out << "bound_certificate " << r.bound_certificate << "\n";
  out << "theorem1_route " << (r.nehari_route_ok ? "available" : "unavailable") << "\n";
  out << "theorem2_route " << (r.mountain_pass_route_ok ? "available" : "unavailable") << "\n";
  out << "route " << route_name(r.route) << "\n";
}

struct SolveOutcome {
  GroundState gs;
  Json summary;
};

inline SolveOutcome solve_once(const RunConfig& c, Route route) {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem pr = make_problem(c.grid, c.phys, c.nl, c.lin);
  SolveOptions o = c.solve;
  o.route = route;
  std::optional<ScalarField> init;
  if (!c.initial_field.empty()) {
    auto [g, f] = read_field(c.initial_field);
    if (!(g == c.grid)) throw ConfigError("initial field grid does not match grid.*");
    init = std::move(f);
  }
  SolveOutcome out{solve_ground_state(pr, o, init), {}};
  std::optional<double> wall;
  if (c.wall_clock) wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.summary = ground_state_summary(c, pr, out.gs, wall);
  return out;
}

inline void write_state(const std::filesystem::path& dir, const RunConfig& c, const GroundState& gs,
                        const Json& summary) {
  std::filesystem::create_directories(dir);
  write_field(dir / "u.field", c.grid, gs.state.u);
  write_field(dir / "phi.field", c.grid, gs.state.phi);
  write_field(dir / "a.field", c.grid, gs.state.a);
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  if (c.svg) {
    write_text_file(dir / "u.svg", field_svg(c.grid, gs.state.u, "u"));
    write_text_file(dir / "phi.svg", field_svg(c.grid, gs.state.phi, "phi"));
    write_text_file(dir / "a.svg", field_svg(c.grid, gs.state.a, "a"));
  }
}

inline void print_state(std::ostream& out, const GroundState& gs) {
  out << "route " << route_name(gs.route) << (gs.converged ? " converged" : " NOT converged")
      << (gs.stalled ? " (backtracking stalled)" : "") << " after " << gs.iterations << " iterations\n";
  out << "energy " << detail::format_double(gs.energy.total) << "\n";
  out << "nehari N " << gs.nehari.N << "  Nsecond " << gs.nehari.Nsecond << "\n";
  out << "residuals u " << gs.residuals.u << "  phi " << gs.residuals.phi << "  a " << gs.residuals.a << "\n";
}

inline int cmd_check_model(const RunConfig& c, std::ostream& out) {
  const auto rep = check_assumptions(c.nl, c.phys);
  print_assumptions(out, rep);
  return kOk;
}

inline int cmd_solve(const RunConfig& c, int seeds, int jobs, std::ostream& out) {
  const Route route = select_route(c.route, check_assumptions(c.nl, c.phys));
  const auto dir = resolve_output_dir(c.output_dir);
  if (seeds <= 1) {
    auto res = solve_once(c, route);
    write_state(dir, c, res.gs, res.summary);
    print_state(out, res.gs);
    return res.gs.converged ? kOk : kNoConvergence;
  }

  // independent runs, one output directory each
  std::vector<RunConfig> cfgs(seeds, c);
  for (int k = 0; k < seeds; ++k) {
    cfgs[k].solve.seed.seed = c.solve.seed.seed + k;
    cfgs[k].raw["solve.seed"] = std::to_string(cfgs[k].solve.seed.seed);
  }
  std::vector<std::optional<SolveOutcome>> results(seeds);
  std::vector<std::string> errors(seeds);
  std::mutex mu;
  int next = 0;
  auto worker = [&] {
    for (;;) {
      int k;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= seeds) return;
        k = next++;
      }
      try {
        results[k] = solve_once(cfgs[k], route);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, std::min(jobs, seeds)); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  Json list = Json::array();
  int best = -1;
  bool all_converged = true;
  for (int k = 0; k < seeds; ++k) {
    if (!results[k]) {
      list.push_back({{"seed", cfgs[k].solve.seed.seed}, {"error", errors[k]}});
      all_converged = false;
      continue;
    }
    const auto& gs = results[k]->gs;
    write_state(dir / ("seed_" + std::to_string(k)), cfgs[k], gs, results[k]->summary);
    list.push_back({{"seed", cfgs[k].solve.seed.seed},
                    {"energy", gs.energy.total},
                    {"converged", gs.converged},
                    {"lp_norm", detail::lp_norm(make_problem(c.grid, c.phys, c.nl, c.lin), gs.state.u,
                                                c.nl.max_exponent())}});
    all_converged = all_converged && gs.converged;
    if (gs.converged && (best < 0 || gs.energy.total < results[best]->gs.energy.total)) best = k;
    out << "seed " << cfgs[k].solve.seed.seed << " energy " << detail::format_double(gs.energy.total)
        << (gs.converged ? "" : " (not converged)") << "\n";
  }
  Json j = {{"config", config_json(c)}, {"runs", list}, {"best", best}};
  if (best >= 0) j["best_energy"] = results[best]->gs.energy.total;
  std::filesystem::create_directories(dir);
  write_text_file(dir / "seeds.json", j.dump(2) + "\n");
  if (best >= 0) out << "lowest energy " << detail::format_double(results[best]->gs.energy.total) << "\n";
  return all_converged ? kOk : kNoConvergence;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& out) {
  const Route route = select_route(c.route, check_assumptions(c.nl, c.phys));
  const Problem base = make_problem(c.grid, c.phys, c.nl, c.lin);
  ContinuationOptions o;
  o.solve = c.solve;
  o.solve.route = route;
  o.cold_check = c.cold_check;
  const auto rep = sweep_mu(base, c.schedule, o);
  const auto dir = resolve_output_dir(c.output_dir);
  std::filesystem::create_directories(dir);
  Json j = {{"config", config_json(c)}, {"params", params_json(c)}, {"grid", grid_json(c.grid)},
            {"route", route_name(route)}, {"continuation", continuation_json(rep)},
            {"timings", timings_json(*base.work, std::nullopt)}};
  write_text_file(dir / "continuation.json", j.dump(2) + "\n");
  const Problem last = with_mu(base, c.schedule.back());
  write_state(dir / "terminal", c, rep.terminal, ground_state_summary(c, last, rep.terminal, std::nullopt));
  for (const auto& e : rep.entries)
    out << "mu " << detail::format_double(e.mu) << " energy " << detail::format_double(e.energy)
        << (e.converged ? "" : " (not converged)") << "\n";
  out << "energy cap " << detail::format_double(rep.energy_cap) << (rep.bounded ? " (bounded)" : " (EXCEEDED)")
      << "\n";
  return rep.terminal.converged ? kOk : kNoConvergence;
}

/// Checks that need no converged state beyond the one solved here: slack
/// refinement and the Cartesian oracle.
inline std::vector<InvariantResult> auxiliary_checks(const RunConfig& c, const Problem& pr, Json& oracle_out) {
  std::vector<InvariantResult> out;
  const int ell = std::abs(c.phys.ell);
  const auto sr = slack_refinement(pr, [&](double r, double z) { return std::pow(r, ell) * std::exp(-(r * r + z * z)); });
  out.push_back(detail::le_check("refinement:slack_nonincreasing", "max-principle slack under grid halving",
                                 CheckKind::Inequality, sr.fine_max() - std::max(sr.coarse_max(), 1e-12), 0.0));

  oracle_out = Json::array();
  if (c.oracle_n.empty()) return out;
  const double X = c.oracle_extent, w = c.oracle_width;
  const Problem op = make_problem(build_grid(96, 192, X, X), c.phys, c.nl, c.lin);
  const auto u = op.grid.sample(
      [&](double r, double z) { return std::pow(r, ell) * std::exp(-(r * r + z * z) / (2.0 * w * w)); });
  std::vector<OracleReport> reps;
  for (int n : c.oracle_n) {
    reps.push_back(compare_energies(CartGrid3D(n, X), op, u));
    oracle_out.push_back(oracle_json(n, reps.back()));
  }
  const auto& fin = reps.back();
  if (c.oracle_n.back() >= 33)
    out.push_back(detail::le_check("oracle:terms_within_2pct", "cylindrical vs Cartesian action terms",
                                   CheckKind::Inequality, fin.max_rel_err, 0.02));
  else
    out.push_back(detail::report("oracle:max_term_error", "cylindrical vs Cartesian action terms", fin.max_rel_err));
  for (std::size_t k = 1; k < reps.size(); ++k) {
    const std::string tag = "oracle:" + std::to_string(c.oracle_n[k - 1]) + "to" + std::to_string(c.oracle_n[k]);
    out.push_back(detail::le_check(tag + ":error_decreases", "term error shrinks under refinement",
                                   CheckKind::Inequality, reps[k].max_rel_err - reps[k - 1].max_rel_err, 0.0));
    out.push_back(detail::le_check(tag + ":div_decreases", "discrete div A shrinks under refinement",
                                   CheckKind::Inequality, reps[k].div_rel - reps[k - 1].div_rel, 0.0));
  }
  out.push_back(detail::le_check("oracle:phi_bound", "0 <= phi <= w/q on the Cartesian grid",
                                 CheckKind::Inequality, fin.phi_bound_slack, 1e-6));
  return out;
}

inline int cmd_verify(const RunConfig& c, std::ostream& out) {
  const Route route = select_route(c.route, check_assumptions(c.nl, c.phys));
  const Problem pr = make_problem(c.grid, c.phys, c.nl, c.lin);
  SolveOptions o = c.solve;
  o.route = route;
  const auto gs = solve_ground_state(pr, o);
  auto results = run_suite(pr, random_probes(c.grid, c.phys.ell, c.probes, c.probe_seed), {gs});
  Json oracle;
  auto aux = auxiliary_checks(c, pr, oracle);
  results.insert(results.end(), aux.begin(), aux.end());
  InvariantResult conv{"state0:converged", "solver reached its tolerances", CheckKind::Inequality,
                       gs.converged ? 0.0 : 1.0, 0.0, gs.converged, false};
  results.push_back(conv);

  const bool ok = all_pass(results);
  const auto dir = resolve_output_dir(c.output_dir);
  std::filesystem::create_directories(dir);
  Json j = {{"config", config_json(c)}, {"params", params_json(c)}, {"grid", grid_json(c.grid)},
            {"route", route_name(route)}, {"invariants", invariants_json(results)}, {"oracle", oracle},
            {"pass", ok}, {"timings", timings_json(*pr.work, std::nullopt)}};
  write_text_file(dir / "verify.json", j.dump(2) + "\n");
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (r.kind == CheckKind::Report) continue;
    if (!r.pass && !r.skipped) ++failed;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-4s %-52s %12.4e  <= %9.2e\n",
                  r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL"), r.name.c_str(), r.measured, r.threshold);
    out << buf;
  }
  out << (ok ? "all invariants pass" : std::to_string(failed) + " invariant(s) failed") << "\n";
  return ok ? kOk : kInvariantFailure;
}

inline int cmd_fiber_scan(const RunConfig& c, std::ostream& out) {
  const Problem pr = make_problem(c.grid, c.phys, c.nl, c.lin);
  ScalarField u;
  if (!c.initial_field.empty()) {
    auto [g, f] = read_field(c.initial_field);
    if (!(g == c.grid)) throw ConfigError("initial field grid does not match grid.*");
    u = std::move(f);
  } else {
    u = make_seed(c.grid, c.phys.ell, c.solve.seed);
  }
  const auto a = reduce(pr, u).a;
  std::string csv = "t,j,jbar,g,reduced\n";
  ScalarField phi_cache = pr.grid.zeros();
  ReducedState warm;
  bool have = false;
  for (int k = 0; k < c.fiber_points; ++k) {
    const double t = c.fiber_tmin * std::pow(c.fiber_tmax / c.fiber_tmin, double(k) / (c.fiber_points - 1));
    const auto fv = mountain_pass_fiber(pr, u, a, t, &phi_cache);
    const auto rs = reduce(pr, detail::scaled(u, t), have ? &warm : nullptr);
    const double g = nehari_value(pr, rs) / (t * t);
    csv += detail::format_double(t) + "," + detail::format_double(fv.j) + "," + detail::format_double(fv.jbar) + "," +
           detail::format_double(g) + "," + detail::format_double(eval_reduced(pr, rs).total) + "\n";
    warm = rs;
    have = true;
  }
  const auto dir = resolve_output_dir(c.output_dir);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "fiber.csv", csv);
  out << csv;
  return kOk;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Vortex ground states of the Klein-Gordon-Maxwell-Proca system"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  int seeds = 1, jobs = 1;
  bool wall = false, svg = false;
  auto common = [&](CLI::App* s) {
    s->add_option("-c,--config", config_path, "flat key=value config file");
    s->add_option("-s,--set", overrides, "override, key=value (repeatable)");
    s->add_option("-o,--out", out_dir, "output directory (relative paths go under $" + std::string(kOutputRootEnv) + ")");
  };
  auto* check = app.add_subcommand("check-model", "print the hypothesis and admissibility report");
  auto* solve = app.add_subcommand("solve", "compute a ground state");
  auto* sweep = app.add_subcommand("sweep-mu", "continue the ground state in mu down to 0");
  auto* verify = app.add_subcommand("verify", "run the invariant suite and the Cartesian oracle");
  auto* fiber = app.add_subcommand("fiber-scan", "tabulate j(t), jbar(t), g(t) along a fiber");
  for (auto* s : {check, solve, sweep, verify, fiber}) common(s);
  solve->add_option("--seeds", seeds, "number of seeds (solve.seed, solve.seed+1, ...)")->check(CLI::PositiveNumber);
  solve->add_option("--jobs", jobs, "parallel runs for --seeds")->check(CLI::PositiveNumber);
  for (auto* s : {solve, sweep, verify}) s->add_flag("--svg", svg, "also write SVG heatmaps");
  solve->add_flag("--wall-clock", wall, "record wall time in the summary (breaks bit-identical output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (!out_dir.empty()) overrides.push_back("output.dir=" + out_dir);
    if (svg) overrides.push_back("output.svg=true");
    if (wall) overrides.push_back("output.wall_clock=true");
    const RunConfig c = load_config(config_path, overrides);
    if (*check) return cmd_check_model(c, out);
    if (*solve) return cmd_solve(c, seeds, jobs, out);
    if (*sweep) return cmd_sweep(c, out);
    if (*verify) return cmd_verify(c, out);
    if (*fiber) return cmd_fiber_scan(c, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConvergenceError& e) {
    err << "no convergence: " << e.what() << "\n";
    return kNoConvergence;
  }
  return kConfigError;
}

}  // namespace kgm
