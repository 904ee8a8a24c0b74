// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "kgm/cli.hpp"

using namespace kgm;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void line(int n, const char* what, bool ok, const std::string& detail) {
  std::printf("%s criterion %2d  %-28s %s\n", ok ? "PASS" : "FAIL", n, what, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Problem problem(int nr, double X, const Nonlinearity& nl = Nonlinearity::pure_power(3.0), PhysParams ph = {}) {
  return make_problem(build_grid(nr, 2 * nr, X, X), ph, nl);
}

double lp(const Problem& pr, std::span<const double> u, double p) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += std::pow(std::abs(u[k]), p) * pr.wc[k];
  return std::pow(s, 1.0 / p);
}

bool state_ok(const GroundState& gs, double& worst_res) {
  worst_res = std::max({gs.residuals.u, gs.residuals.phi, gs.residuals.a});
  return gs.converged && std::abs(gs.nehari.N) <= 1e-8 * gs.h1_norm_sq && gs.nehari.Nsecond < 0.0 &&
         gs.energy.total > 0.0 && worst_res <= 1e-6;
}

// 1: reduction identities on 20 probes and 3 converged states
void reduction_identities() {
  double worst = 0.0;
  std::size_t count = 0;
  bool ok = true;
  auto scan = [&](const std::vector<InvariantResult>& rs) {
    for (const auto& r : rs) {
      if (!(r.pass || r.skipped)) ok = false;
      if (r.kind != CheckKind::Identity || r.skipped) continue;
      worst = std::max(worst, r.measured);
      ++count;
    }
  };
  const auto pr = problem(20, 8.0);
  const auto gs = solve_ground_state(pr, SolveOptions{});
  scan(run_suite(pr, random_probes(pr.grid, 1, 20, 2024), {gs}));
  const auto p0 = with_mu(pr, 0.0);
  scan(run_suite(p0, {}, {solve_ground_state(p0, SolveOptions{})}));
  const auto p4 = problem(20, 8.0, Nonlinearity::pure_power(4.0));
  scan(run_suite(p4, {}, {solve_ground_state(p4, SolveOptions{})}));
  ok = ok && gs.converged && worst <= 1e-8;
  line(1, "reduction identities", ok, fmt("max rel residual %.2e over %.0f checks", worst, double(count)));
}

// 2: maximum-principle bounds at 128x256 and after one halving
void bound_suite() {
  const auto pr = problem(128, 10.0);
  const auto s = slack_refinement(pr, [](double r, double z) { return 5.0 * r * std::exp(-(r * r + z * z) / 2.0); });
  const bool ok = s.coarse_max() <= 1e-6 && s.fine_max() <= std::max(s.coarse_max(), 1e-12);
  line(2, "bound suite", ok, fmt("eps_h %.2e at 128x256, %.2e at 256x512", s.coarse_max(), s.fine_max()));
}

// 3: directional derivatives against central differences
void gradient_check() {
  const auto pr = problem(20, 8.0);
  const auto u = pr.grid.sample([](double r, double z) { return 3.0 * r * std::exp(-((r - 1) * (r - 1) + 0.7 * z * z)); });
  const auto rho = grad_reduced(pr, reduce(pr, u));
  std::mt19937_64 gen(17);
  std::normal_distribution<double> nd;
  const double h = 1e-4;
  double worst = 0.0;
  for (int d = 0; d < 20; ++d) {
    ScalarField v(u.size()), up = u, um = u;
    for (auto& x : v) x = nd(gen);
    for (std::size_t k = 0; k < u.size(); ++k) {
      up[k] += h * v[k];
      um[k] -= h * v[k];
    }
    const double fd = (eval_reduced(pr, reduce(pr, up)).total - eval_reduced(pr, reduce(pr, um)).total) / (2 * h);
    const double an = detail::dot(rho, v);
    worst = std::max(worst, std::abs(fd - an) / std::abs(an));
  }
  line(3, "gradient correctness", worst <= 1e-5, fmt("max rel error %.2e over 20 directions", worst));
}

// Matrix-free finite-volume vortex operator, written apart from the library
// assembly: -div(r grad u) + (m^2 - w^2) r u + ell^2 u / r, cell integrated.
struct VortexStencil {
  const CylGrid& g;
  double gap, l2;
  std::vector<double> apply(const std::vector<double>& u) const {
    const double tau = 2.0 * std::acos(-1.0), dr = g.dr(), dz = g.dz();
    std::vector<double> y(u.size(), 0.0);
    for (int j = 0; j < g.nz(); ++j)
      for (int i = 0; i < g.nr(); ++i) {
        const double r = g.r(i), c = u[g.index(i, j)];
        double acc = (gap * r + l2 / r) * dr * dz * c;
        const double east = (i + 1 < g.nr()) ? u[g.index(i + 1, j)] : -c;  // ghost for the wall at R
        acc += (r + 0.5 * dr) * dz / dr * (c - east);
        if (i > 0) acc += (r - 0.5 * dr) * dz / dr * (c - u[g.index(i - 1, j)]);
        const double up = (j + 1 < g.nz()) ? u[g.index(i, j + 1)] : -c;
        const double down = (j > 0) ? u[g.index(i, j - 1)] : -c;
        acc += r * dr / dz * ((c - up) + (c - down));
        y[g.index(i, j)] = tau * acc;
      }
    return y;
  }
  std::vector<double> solve(const std::vector<double>& b) const {
    std::vector<double> x(b.size(), 0.0), r = b, p = b;
    auto dot = [](const std::vector<double>& a, const std::vector<double>& c) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * c[k];
      return s;
    };
    double rr = dot(r, r);
    const double stop = 1e-28 * rr;
    for (int it = 0; it < 20000 && rr > stop; ++it) {
      const auto Ap = apply(p);
      const double alpha = rr / dot(p, Ap);
      for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * Ap[k];
      }
      const double rn = dot(r, r);
      for (std::size_t k = 0; k < x.size(); ++k) p[k] = r[k] + rn / rr * p[k];
      rr = rn;
    }
    return x;
  }
};

// Normalised Sobolev gradient flow for -Lu + c u = |u|^{p-2} u; returns the energy.
double gradient_flow_energy(const Problem& pr, double p) {
  const VortexStencil A{pr.grid, pr.phys.mass_gap(), double(pr.phys.ell) * pr.phys.ell};
  std::vector<double> u = pr.grid.sample([](double r, double z) { return r * std::exp(-(r * r + z * z) / 2.0); });
  const double tau = 0.8;
  double lambda = 0.0, prev = 0.0;
  for (int n = 0; n < 5000; ++n) {
    std::vector<double> f(u.size());
    double uAu = 0.0, uf = 0.0;
    const auto Au = A.apply(u);
    for (std::size_t k = 0; k < u.size(); ++k) {
      f[k] = std::pow(std::abs(u[k]), p - 2.0) * u[k] * pr.wc[k];
      uAu += u[k] * Au[k];
      uf += u[k] * f[k];
    }
    lambda = uAu / uf;
    const auto v = A.solve(f);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = (1.0 - tau) * u[k] + tau * lambda * v[k];
    double nrm = 0.0;
    for (double x : u) nrm = std::max(nrm, std::abs(x));
    for (auto& x : u) x /= nrm;
    if (n > 10 && std::abs(lambda - prev) <= 1e-14 * lambda) break;
    prev = lambda;
  }
  // u* = s u solves A u* = f(u*) with s^{p-2} = lambda(u)
  const auto Au = A.apply(u);
  double uAu = 0.0, uf = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    uAu += u[k] * Au[k];
    uf += std::pow(std::abs(u[k]), p) * pr.wc[k];
  }
  const double s = std::pow(uAu / uf, 1.0 / (p - 2.0));
  return (0.5 - 1.0 / p) * s * s * uAu;
}

// 4: decoupled closed forms and an independent solver
void decoupled() {
  PhysParams ph;
  ph.q = 0.0;
  const double p = 3.0;
  const auto pr = problem(20, 8.0, Nonlinearity::pure_power(p), ph);
  const auto u = make_seed(pr.grid, 1);
  const double Q = norm_sq_h1(pr, u), P = std::pow(lp(pr, u, p), p);
  SolveOptions tight;
  tight.nehari_tol = 1e-13;
  const auto np = project_nehari(pr, u, tight);
  const double t_exact = std::pow(Q / P, 1.0 / (p - 2.0));
  double worst = std::abs(np.t - t_exact) / t_exact;
  for (double t : {0.1, 0.5, 1.0, t_exact, 3.0}) {
    const double j = eval_reduced(pr, reduce(pr, detail::scaled(u, t))).total;
    const double exact = 0.5 * t * t * Q - std::pow(t, p) * P / p;
    worst = std::max(worst, std::abs(j - exact) / std::abs(exact));
  }
  const auto gs = solve_ground_state(pr, SolveOptions{});
  const double E_flow = gradient_flow_energy(pr, p);
  const double gap = std::abs(gs.energy.total - E_flow) / E_flow;
  line(4, "decoupled closed forms", gs.converged && worst <= 1e-8 && gap <= 1e-4,
       fmt("closed form %.2e, flow energy %.10g, gap %.2e", worst, E_flow, gap));
}

// 5: cylindrical reduction against the 3D Cartesian oracle
void oracle() {
  const double X = 6.0, w = 1.5;
  const auto pr = problem(96, X);
  const auto u = pr.grid.sample([&](double r, double z) { return r * std::exp(-(r * r + z * z) / (2 * w * w)); });
  const auto coarse = compare_energies(CartGrid3D(17, X), pr, u);
  const auto fine = compare_energies(CartGrid3D(33, X), pr, u);
  const bool ok = fine.max_rel_err <= 0.02 && fine.max_rel_err < coarse.max_rel_err && fine.div_rel < coarse.div_rel;
  line(5, "oracle equivalence", ok,
       fmt("max term error %.4f at N=33 (%.4f at 17), div ratio %.3f", fine.max_rel_err, coarse.max_rel_err,
           fine.div_rel / coarse.div_rel));
}

// 6: certificates over 5 perturbed seeds on the default model
void certificates() {
  const auto c = build_config({});
  const auto pr = make_problem(c.grid, c.phys, c.nl, c.lin);
  std::vector<double> E, L;
  bool ok = true;
  double worst_res = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    SolveOptions o = c.solve;
    o.seed.perturbation = 0.3;
    o.seed.seed = s;
    const auto gs = solve_ground_state(pr, o);
    double res = 0.0;
    ok = ok && state_ok(gs, res);
    worst_res = std::max(worst_res, res);
    E.push_back(gs.energy.total);
    L.push_back(lp(pr, gs.state.u, 3.0));
  }
  const double best = *std::min_element(E.begin(), E.end());
  const double spread = (*std::max_element(E.begin(), E.end()) - best) / best;
  const double lmin = *std::min_element(L.begin(), L.end()), lmax = *std::max_element(L.begin(), L.end());
  ok = ok && spread <= 0.01 && lmin >= 0.5 * lmax && lmin > 1e-3;
  line(6, "ground-state certificates", ok,
       fmt("energy spread %.2e, min |u|_3 %.4g, worst residual %.2e", spread, lmin, worst_res));
}

// 7: both routes at p = sigma = 4
void route_agreement() {
  const auto pr = problem(32, 6.0, Nonlinearity::pure_power(4.0));
  SolveOptions o;
  const auto a = solve_ground_state(pr, o);
  o.route = Route::MountainPass;
  const auto b = solve_ground_state(pr, o);
  const double gap = std::abs(a.energy.total - b.energy.total) / a.energy.total;
  line(7, "route agreement", a.converged && b.converged && gap <= 0.01,
       fmt("energies %.8g and %.8g, gap %.2e", a.energy.total, b.energy.total, gap));
}

// 8: jbar along fibers for superquartic terms
void fiber_monotonicity() {
  const Nonlinearity nl({{1.0, 4.0}, {1.0, 5.0}});
  const auto pr = problem(20, 8.0, nl);
  double worst = -1e300;
  int fibers = 0;
  auto dirs = random_probes(pr.grid, 1, 3, 5);
  dirs.push_back(make_seed(pr.grid, 1));
  for (const auto& u : dirs) {
    const auto a = reduce(pr, u).a;
    ScalarField cache = pr.grid.zeros();
    double prev = 0.0;
    for (int k = 0; k < 40; ++k) {
      const double t = 0.05 * std::pow(2000.0, k / 39.0);
      const double jb = mountain_pass_fiber(pr, u, a, t, &cache).jbar;
      if (k > 0) worst = std::max(worst, (jb - prev) / std::max(1.0, std::abs(prev)));
      prev = jb;
    }
    ++fibers;
  }
  line(8, "fiber monotonicity", worst <= 1e-8, fmt("max relative increase %.2e on %.0f fibers", worst, double(fibers)));
}

// 9: mu continuation down to Maxwell
void continuation() {
  const auto pr = problem(20, 8.0);
  const auto sched = default_mu_schedule();
  const auto rep = sweep_mu(pr, sched);
  bool ok = rep.bounded && rep.entries.size() == sched.size();
  for (const auto& e : rep.entries) ok = ok && e.converged && e.energy <= rep.energy_cap;
  double chain = 0.0;
  for (const auto& c : gauge_energy_monotonicity_check(pr, rep.entries.empty() ? pr.grid.zeros() : rep.terminal.state.u, sched))
    chain = std::max(chain, c.violation);
  bool decreasing = rep.diffs.size() >= 4;
  for (std::size_t k = rep.diffs.size() - 3; decreasing && k < rep.diffs.size(); ++k)
    decreasing = rep.diffs[k].h1 < rep.diffs[k - 1].h1;
  double res = 0.0;
  const bool terminal = state_ok(rep.terminal, res);
  ok = ok && chain <= 1e-8 && decreasing && terminal;
  line(9, "mu continuation", ok,
       fmt("chain %.2e, last step %.2e, terminal residual %.2e", chain, rep.diffs.empty() ? 0.0 : rep.diffs.back().h1,
           res));
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "kgm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

// 10: repeated runs give identical summaries
void determinism() {
  const fs::path root = fs::temp_directory_path() / ("kgm_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  ::setenv(kOutputRootEnv, root.c_str(), 1);
  const std::vector<std::string> args = {"solve", "-s", "grid.nr=20", "-s", "grid.nz=40", "-s", "grid.R=8",
                                         "-s", "grid.L=8", "-s", "solve.perturbation=0.2", "-o", "run"};
  bool ok = cli(args) == kOk;
  const auto first = ok ? read_text_file((root / "run" / "summary.json").string()) : "";
  fs::remove_all(root / "run");
  ok = ok && cli(args) == kOk && read_text_file((root / "run" / "summary.json").string()) == first;
  fs::remove_all(root);
  ::unsetenv(kOutputRootEnv);
  line(10, "determinism", ok, fmt("summary of %.0f bytes reproduced", double(first.size())));
}

template <class Fn>
void guarded(int n, const char* what, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    line(n, what, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded(1, "reduction identities", reduction_identities);
  guarded(2, "bound suite", bound_suite);
  guarded(3, "gradient correctness", gradient_check);
  guarded(4, "decoupled closed forms", decoupled);
  guarded(5, "oracle equivalence", oracle);
  guarded(6, "ground-state certificates", certificates);
  guarded(7, "route agreement", route_agreement);
  guarded(8, "fiber monotonicity", fiber_monotonicity);
  guarded(9, "mu continuation", continuation);
  guarded(10, "determinism", determinism);
  std::printf("%s\n", failures == 0 ? "all criteria pass" : (std::to_string(failures) + " criteria failed").c_str());
  return failures == 0 ? 0 : 1;
}
