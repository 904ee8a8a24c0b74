#pragma once

// Ground-state search. Two routes:
//  - projected Sobolev-gradient descent of the reduced functional on its
//    Nehari set (requires the sigma-monotonicity hypothesis and the
//    admissibility condition);
//  - an alternating scheme on the two-variable functional: exact gauge solve,
//    maximization along the ray t -> J(t u, a) with the gauge frozen, then a
//    Sobolev-gradient step in u (requires f(s)/|s|^3 nondecreasing).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kgm/functional.hpp"

namespace kgm {

/// Seed u0 = c r^|l| exp(-(r^2 + (z - z0)^2) / w^2) (1 + eps * bumps), ||u0||_2 = 1.
struct SeedProfile {
  double width = 1.0;
  double z_shift = 0.0;
  double perturbation = 0.0;
  std::uint64_t seed = 0;
};

struct SolveOptions {
  int max_iter = 400;
  double grad_tol = 1e-6;     // ||rho||_{H^-1} / (1 + |J|)
  double nehari_tol = 1e-8;   // |N(u)| / ||u||_H^2
  double initial_step = 1.0;
  double max_step = 4.0;
  double backtrack = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 30;
  double energy_slack = 1e-12;  // accepted increase, relative to max(1, |J|)
  bool recentre = true;
  bool probe_multi_root = true;
  bool conjugate = true;
  bool state_metric = true;
  Route route = Route::NehariMinimization;
  SeedProfile seed;
};

inline void validate(const SolveOptions& o) {
  auto in01 = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in01(o.grad_tol) || !in01(o.nehari_tol)) throw ConfigError("tolerances must lie in (0,1)");
  if (!in01(o.backtrack)) throw ConfigError("backtracking ratio must lie in (0,1)");
  if (!(o.initial_step > 0.0) || !(o.max_step >= o.initial_step)) throw ConfigError("bad step-size policy");
  if (o.max_iter < 0) throw ConfigError("max_iter must be nonnegative");
}

/// Uniform [0,1) from the top 53 bits, identical on every standard library.
class Uniform01 {
 public:
  explicit Uniform01(std::uint64_t seed) : eng_(seed) {}
  double operator()() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double operator()(double lo, double hi) { return lo + (hi - lo) * (*this)(); }

 private:
  std::mt19937_64 eng_;
};

inline ScalarField make_seed(const CylGrid& g, int ell, const SeedProfile& s = {}) {
  const int order = std::abs(ell);
  struct Bump {
    double r, z, w, c;
  };
  std::vector<Bump> bumps;
  if (s.perturbation != 0.0) {
    Uniform01 rng(s.seed);
    for (int k = 0; k < 4; ++k) bumps.push_back({rng(0.3, 2.5), rng(-2.0, 2.0), rng(0.5, 1.5), rng(-1.0, 1.0)});
  }
  ScalarField u = g.sample([&](double r, double z) {
    double shape = 1.0;
    for (const auto& b : bumps)
      shape += s.perturbation * b.c * std::exp(-((r - b.r) * (r - b.r) + (z - b.z) * (z - b.z)) / (b.w * b.w));
    const double dz = z - s.z_shift;
    return std::pow(r, order) * std::exp(-(r * r + dz * dz) / (s.width * s.width)) * shape;
  });
  double n2 = 0.0;
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) n2 += u[g.index(i, j)] * u[g.index(i, j)] * g.w_cyl(i);
  const double c = 1.0 / std::sqrt(n2);
  for (auto& x : u) x *= c;
  return u;
}

inline double axial_centroid(const CylGrid& g, std::span<const double> u) {
  double num = 0.0, den = 0.0;
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) {
      const double w = u[g.index(i, j)] * u[g.index(i, j)] * g.w_cyl(i);
      num += g.z(j) * w;
      den += w;
    }
  return den > 0.0 ? num / den : 0.0;
}

/// Periodic axial shift u(z) -> u(z - s) with linear interpolation.
inline ScalarField shift_axial(const CylGrid& g, std::span<const double> u, double s) {
  ScalarField out(u.size());
  const double cells = s / g.dz();
  const int nz = g.nz();
  for (int j = 0; j < nz; ++j) {
    const double src = j - cells;
    const double fl = std::floor(src);
    const double frac = src - fl;
    const int j0 = ((static_cast<int>(fl) % nz) + nz) % nz;
    const int j1 = (j0 + 1) % nz;
    for (int i = 0; i < g.nr(); ++i)
      out[g.index(i, j)] = (1.0 - frac) * u[g.index(i, j0)] + frac * u[g.index(i, j1)];
  }
  return out;
}

struct RecentreResult {
  ScalarField u;
  double shift = 0.0;
  double centroid_before = 0.0;
  double centroid_after = 0.0;
};

/// Moves the u^2-weighted axial centroid to within dz/2 of z = 0. Fields that
/// already satisfy this are returned untouched.
inline RecentreResult recentre(const CylGrid& g, std::span<const double> u) {
  if (std::all_of(u.begin(), u.end(), [](double x) { return x == 0.0; }))
    throw ConfigError("recentre needs a nonzero field");
  RecentreResult res;
  res.centroid_before = axial_centroid(g, u);
  if (std::abs(res.centroid_before) <= 0.5 * g.dz()) {
    res.u.assign(u.begin(), u.end());
    res.centroid_after = res.centroid_before;
    return res;
  }
  res.shift = -res.centroid_before;
  res.u = shift_axial(g, u, res.shift);
  res.centroid_after = axial_centroid(g, res.u);
  return res;
}

struct NehariProjection {
  double t = 1.0;
  ReducedState state;  // reduction of t u
  int evaluations = 0;
  bool multi_root = false;
};

namespace detail {

inline ScalarField scaled(std::span<const double> u, double t) {
  ScalarField v(u.begin(), u.end());
  for (auto& x : v) x *= t;
  return v;
}

/// Illinois regula falsi on a sign-change bracket; `fn` returns the function
/// value and `done(x, fx)` decides acceptance.
template <class Fn, class Done>
double illinois(Fn&& fn, double x0, double f0, double x1, double f1, Done&& done, int max_iter = 80) {
  int side = 0;
  for (int it = 0; it < max_iter; ++it) {
    double x = (x0 * f1 - x1 * f0) / (f1 - f0);
    if (!(x > std::min(x0, x1) && x < std::max(x0, x1))) x = 0.5 * (x0 + x1);
    const double fx = fn(x);
    if (done(x, fx)) return x;
    if ((fx > 0) == (f1 > 0)) {
      x1 = x, f1 = fx;
      if (side == -1) f0 *= 0.5;
      side = -1;
    } else {
      x0 = x, f0 = fx;
      if (side == 1) f1 *= 0.5;
      side = 1;
    }
    if (std::abs(x1 - x0) <= 1e-15 * std::max(std::abs(x0), std::abs(x1))) return x;
  }
  throw ConvergenceError("root search did not converge");
}

}  // namespace detail

/// Finds t > 0 with t u on the Nehari set: |N(t u)| <= nehari_tol ||t u||_H^2.
/// g(t) = N(t u)/t^2 is positive for small t and negative for large t; when
/// several sign changes are found the largest + to - crossing is kept.
inline NehariProjection project_nehari(const Problem& pr, std::span<const double> u, const SolveOptions& o = {},
                                       const ReducedState* warm = nullptr) {
  const double h2 = norm_sq_h1(pr, u);
  if (!(h2 > 0.0)) throw ConfigError("project_nehari needs a nonzero field");
  const double tol = o.nehari_tol * h2;

  NehariProjection out;
  ReducedState last;
  bool have_last = false;
  double best_t = 0.0, best_abs = std::numeric_limits<double>::infinity();
  ReducedState best_state;

  auto g = [&](double t) {
    const auto tu = detail::scaled(u, t);
    ReducedState rs = reduce(pr, tu, have_last ? &last : warm);
    const double val = nehari_value(pr, rs) / (t * t);
    ++out.evaluations;
    if (std::abs(val) < best_abs) {
      best_abs = std::abs(val);
      best_t = t;
      best_state = rs;
    }
    last = std::move(rs);
    have_last = true;
    return val;
  };
  auto done = [&](double, double v) { return std::abs(v) <= tol; };
  auto finish = [&]() {
    out.t = best_t;
    out.state = std::move(best_state);
    return out;
  };

  double g1 = g(1.0);
  if (done(1.0, g1) && !o.probe_multi_root) return finish();

  // model g(t) ~ Q - P t^(s-2) with couplings frozen at t = 1
  double fu = 0.0, dfu = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    fu += pr.nl.f(u[k]) * u[k] * pr.wc[k];
    dfu += pr.nl.df(u[k]) * u[k] * u[k] * pr.wc[k];
  }
  double root = 1.0;
  if (!done(1.0, g1)) {
    double t_guess = 1.0;
    if (fu > 0.0) {
      const double s_eff = dfu / fu + 1.0;
      const double Q = g1 + fu;
      if (Q > 0.0 && s_eff > 2.0) t_guess = std::clamp(std::pow(Q / fu, 1.0 / (s_eff - 2.0)), 1e-3, 1e3);
    }
    double ta = 1.0, ga = g1;
    double tb = t_guess, gb = t_guess == 1.0 ? g1 : g(t_guess);
    if (done(tb, gb)) {
      root = tb;
    } else {
      // expand until the signs differ
      const double factor = 1.5;
      int guard = 0;
      while ((ga > 0) == (gb > 0)) {
        if (++guard > 80) throw ConvergenceError("no Nehari sign change found in [1e-6, 1e6]");
        const bool up = gb > 0;  // positive: root lies further out
        const double edge = up ? std::max(ta, tb) : std::min(ta, tb);
        const double next = up ? edge * factor : edge / factor;
        if (next > 1e6 || next < 1e-6) throw ConvergenceError("no Nehari sign change found in [1e-6, 1e6]");
        ta = edge, ga = (edge == tb ? gb : ga);
        tb = next, gb = g(next);
        if (done(tb, gb)) break;
      }
      root = done(tb, gb) ? tb : detail::illinois(g, ta, ga, tb, gb, done);
    }
  }

  if (o.probe_multi_root) {
    // a positive value above the root means another + to - crossing further out
    for (int rep = 0; rep < 3; ++rep) {
      const double probe = 2.0 * root;
      const double gp = g(probe);
      if (!(gp > 0.0)) break;
      out.multi_root = true;
      double ta = probe, ga = gp, tb = probe * 2.0, gb = g(tb);
      while (gb > 0.0) {
        if (tb > 1e6) throw ConvergenceError("no Nehari sign change found in [1e-6, 1e6]");
        ta = tb, ga = gb, tb *= 2.0, gb = g(tb);
      }
      best_abs = std::numeric_limits<double>::infinity();
      root = detail::illinois(g, ta, ga, tb, gb, done);
    }
    // the probe evaluations may have replaced the tracked best; make sure the
    // returned state is the root's
    if (std::abs(best_t - root) > 0.0) {
      best_abs = std::numeric_limits<double>::infinity();
      g(root);
    }
  }
  return finish();
}

struct IterationRecord {
  double energy = 0.0;
  double grad_rel = 0.0;
  double nehari_rel = 0.0;
  double step = 0.0;
  int backtracks = 0;
};

struct PdeResiduals {
  double u = 0.0;    // ||rho||_{H^-1} / (1 + |J|)
  double phi = 0.0;  // dual-norm residual of the phi system, relative
  double a = 0.0;    // dual-norm residual of the gauge system, relative
};

struct GroundState {
  ReducedState state;
  EnergyBreakdown energy;
  NehariDiagnostics nehari;
  PdeResiduals residuals;
  ScalarField psi, gauge_prime;
  std::vector<IterationRecord> history;
  Route route = Route::NehariMinimization;
  bool converged = false;
  bool stalled = false;
  int iterations = 0;
  int multi_root_events = 0;
  double constraint_u = 0.0;  // mountain-pass route: d_u J(u,a)[u] / ||u||_H^2 at the last pair
  double constraint_a = 0.0;  // mountain-pass route: d_a J(u,a)[a], relative
  double h1_norm_sq = 0.0;
};

namespace detail {

inline double dual_residual(const Problem&, const SparseOperator& A, std::span<const double> x,
                            std::span<const double> b) {
  const auto Ax = A.apply(x);
  std::vector<double> r(b.size());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = b[k] - Ax[k];
  const double bx = dot(b, x);
  if (!(bx > 0.0)) return 0.0;
  std::vector<double> z(r.size(), 0.0);
  if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; })) return 0.0;
  spd_solve_into(A, r, z, {1e-6, 0});
  return std::sqrt(std::max(0.0, dot(r, z)) / bx);
}

}  // namespace detail

inline PdeResiduals pde_residuals(const Problem& pr, const ReducedState& rs, double grad_dual, double energy) {
  PdeResiduals res;
  res.u = grad_dual / (1.0 + std::abs(energy));
  const auto& p = pr.phys;
  {
    std::vector<double> b(rs.u.size());
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = p.q * p.omega * rs.u[k] * rs.u[k] * pr.wc[k];
    res.phi = detail::dual_residual(pr, phi_operator(pr, rs.u), rs.phi, b);
  }
  {
    std::vector<double> b(rs.u.size());
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = p.q * p.ell * rs.u[k] * rs.u[k] * pr.wi[k];
    res.a = detail::dual_residual(pr, gauge_operator(pr, rs.u), rs.a, b);
  }
  return res;
}

/// Fills energies, Nehari diagnostics, derivative fields and residuals of a
/// state produced by either route.
inline void finalize(const Problem& pr, GroundState& gs) {
  gs.psi = solve_psi(pr, gs.state.u, gs.state.phi);
  gs.gauge_prime = solve_gauge_prime(pr, gs.state.u, gs.state.a);
  gs.energy = eval_reduced(pr, gs.state);
  gs.nehari = nehari_quantities(pr, gs.state, gs.psi, gs.gauge_prime);
  gs.residuals = pde_residuals(pr, gs.state, gs.nehari.grad_dual, gs.energy.total);
  gs.h1_norm_sq = norm_sq_h1(pr, gs.state.u);
}

inline double accepted_slack(const SolveOptions& o, double E) { return o.energy_slack * std::max(1.0, std::abs(E)); }

/// Gradient in the metric of the linearized u-operator at the current
/// couplings, L + [m^2 - (w - q phi)^2] + (l - q a)^2 / r^2.
inline SobolevGradient state_gradient(const Problem& pr, std::span<const double> phi, std::span<const double> a,
                                      std::span<const double> rho, const ScalarField* warm) {
  const auto& p = pr.phys;
  std::vector<double> d(rho.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double e = p.omega - p.q * phi[k];
    const double v = p.ell - p.q * a[k];
    d[k] = (p.m * p.m - e * e) * pr.wc[k] + v * v * pr.wi[k];
  }
  const auto A = pr.lap.with_diagonal_added(d);
  SobolevGradient g;
  g.direction = warm ? *warm : pr.grid.zeros();
  counted_solve(pr, A, rho, g.direction);
  g.dual_norm = std::sqrt(std::max(0.0, detail::dot(rho, g.direction)));
  return g;
}

namespace detail {

/// Search direction: Polak-Ribiere+ on top of the preconditioned gradient,
/// with the H^-1 dual norm of the residual kept for stopping.
class DescentDirection {
 public:
  DescentDirection(const Problem& pr, const SolveOptions& o) : pr_(pr), o_(o) {}

  double update(std::span<const double> rho, std::span<const double> phi, std::span<const double> a) {
    const ScalarField* w = warm_.empty() ? nullptr : &warm_;
    auto sg = o_.state_metric ? state_gradient(pr_, phi, a, rho, w) : sobolev_gradient(pr_, rho, w);
    warm_ = sg.direction;
    double dual = sg.dual_norm;
    if (o_.state_metric) {
      h1_warm_ = sobolev_gradient(pr_, rho, h1_warm_.empty() ? nullptr : &h1_warm_).direction;
      dual = std::sqrt(std::max(0.0, dot(rho, h1_warm_)));
    }
    double beta = 0.0;
    if (o_.conjugate && !dir_.empty()) {
      const double den = dot(prev_rho_, prev_G_);
      double num = 0.0;
      for (std::size_t k = 0; k < rho.size(); ++k) num += rho[k] * (sg.direction[k] - prev_G_[k]);
      beta = den > 0.0 ? std::max(0.0, num / den) : 0.0;
    }
    if (beta == 0.0) {
      dir_ = sg.direction;
    } else {
      for (std::size_t k = 0; k < dir_.size(); ++k) dir_[k] = sg.direction[k] + beta * dir_[k];
      if (!(dot(rho, dir_) > 0.0)) dir_ = sg.direction;
    }
    slope_ = dot(rho, dir_);
    prev_rho_.assign(rho.begin(), rho.end());
    prev_G_ = std::move(sg.direction);
    return dual;
  }

  void reset() { warm_.clear(), h1_warm_.clear(), dir_.clear(); }
  const ScalarField& direction() const { return dir_; }
  double slope() const { return slope_; }

 private:
  const Problem& pr_;
  const SolveOptions& o_;
  ScalarField warm_, h1_warm_, dir_, prev_rho_, prev_G_;
  double slope_ = 0.0;
};

}  // namespace detail

/// Projected Sobolev-gradient descent on the Nehari set.
inline GroundState minimize_ground_state(const Problem& pr, const SolveOptions& o,
                                         std::optional<ScalarField> initial = std::nullopt) {
  validate(o);
  GroundState gs;
  gs.route = Route::NehariMinimization;
  ScalarField u0 = initial ? *initial : make_seed(pr.grid, pr.phys.ell, o.seed);
  if (o.recentre) u0 = recentre(pr.grid, u0).u;

  auto proj = project_nehari(pr, u0, o);
  gs.multi_root_events += proj.multi_root;
  ReducedState rs = std::move(proj.state);
  double E = eval_action(pr, rs.u, rs.phi, rs.a);
  double alpha = o.initial_step;
  detail::DescentDirection dd(pr, o);

  for (int it = 0;; ++it) {
    const auto rho = grad_reduced(pr, rs);
    const double dual = dd.update(rho, rs.phi, rs.a);
    const double h2 = norm_sq_h1(pr, rs.u);
    const double grad_rel = dual / (1.0 + std::abs(E));
    const double nrel = std::abs(detail::dot(rho, rs.u)) / h2;
    IterationRecord rec{E, grad_rel, nrel, 0.0, 0};
    if (grad_rel <= o.grad_tol && nrel <= o.nehari_tol) {
      gs.history.push_back(rec);
      gs.converged = true;
      break;
    }
    if (it >= o.max_iter) {
      gs.history.push_back(rec);
      break;
    }
    const auto& dir = dd.direction();
    const double slope = dd.slope();

    bool accepted = false;
    double a_try = alpha;
    for (int bt = 0; bt <= o.max_backtracks; ++bt) {
      ScalarField trial = rs.u;
      for (std::size_t k = 0; k < trial.size(); ++k) trial[k] -= a_try * dir[k];
      try {
        auto p2 = project_nehari(pr, trial, o, &rs);
        const double E2 = eval_action(pr, p2.state.u, p2.state.phi, p2.state.a);
        if (E2 <= E - o.armijo * a_try * slope + accepted_slack(o, E)) {
          gs.multi_root_events += p2.multi_root;
          rs = std::move(p2.state);
          E = E2;
          accepted = true;
          rec.step = a_try;
          rec.backtracks = bt;
          break;
        }
      } catch (const ConvergenceError&) {
        // projection failed for this trial point; shrink the step
      }
      a_try *= o.backtrack;
    }
    gs.history.push_back(rec);
    if (!accepted) {
      gs.stalled = true;
      break;
    }
    alpha = rec.backtracks == 0 ? std::min(o.max_step, 2.0 * a_try) : a_try;

    if (o.recentre && std::abs(axial_centroid(pr.grid, rs.u)) > 0.5 * pr.grid.dz()) {
      auto rc = recentre(pr.grid, rs.u);
      auto p3 = project_nehari(pr, rc.u, o, &rs);
      rs = std::move(p3.state);
      E = eval_action(pr, rs.u, rs.phi, rs.a);
      dd.reset();
    }
  }
  gs.iterations = static_cast<int>(gs.history.size()) - 1;
  gs.state = std::move(rs);
  finalize(pr, gs);
  return gs;
}

namespace detail {

/// Root of jbar(t) = d_u J(t u, a)[u] / t^3 for frozen a; unique when
/// f(s)/|s|^3 is nondecreasing.
inline double fiber_argmax(const Problem& pr, std::span<const double> u, std::span<const double> a,
                           double nehari_tol, ScalarField& phi_cache) {
  const double h2 = norm_sq_h1(pr, u);
  auto jb = [&](double t) { return mountain_pass_fiber(pr, u, a, t, &phi_cache).jbar; };
  auto done = [&](double t, double v) { return std::abs(v) * t * t <= nehari_tol * h2; };
  double ta = 1.0, ga = jb(1.0);
  if (done(ta, ga)) return ta;
  double tb = ga > 0 ? 2.0 : 0.5, gb = jb(tb);
  while ((ga > 0) == (gb > 0)) {
    if (done(tb, gb)) return tb;
    ta = tb, ga = gb;
    tb = ga > 0 ? tb * 2.0 : tb * 0.5;
    if (tb > 1e6 || tb < 1e-6) throw ConvergenceError("fiber maximum not bracketed");
    gb = jb(tb);
  }
  if (done(tb, gb)) return tb;
  return illinois(jb, ta, ga, tb, gb, done);
}

}  // namespace detail

/// Alternating gauge solve / fiber maximization / Sobolev descent on the
/// two-variable functional. Stops when both constraint residuals and the
/// gradient dual norm are below tolerance.
inline GroundState mountain_pass_search(const Problem& pr, const SolveOptions& o,
                                        std::optional<ScalarField> initial = std::nullopt) {
  validate(o);
  GroundState gs;
  gs.route = Route::MountainPass;
  ScalarField u = initial ? *initial : make_seed(pr.grid, pr.phys.ell, o.seed);
  if (o.recentre) u = recentre(pr.grid, u).u;
  ReducedState rs = reduce(pr, u);
  double alpha = o.initial_step;
  detail::DescentDirection dd(pr, o);

  for (int it = 0;; ++it) {
    // (i) exact gauge for the current u
    rs = reduce(pr, u, &rs);
    const ScalarField a = rs.a;
    // (ii) maximize along the ray with the gauge frozen
    ScalarField phi = rs.phi;
    const double t = detail::fiber_argmax(pr, u, a, o.nehari_tol, phi);
    for (auto& x : u) x *= t;
    phi = solve_phi(pr, u, &phi);

    const auto rho = u_residual(pr, u, phi, a);
    const double dual = dd.update(rho, phi, a);
    const double h2 = norm_sq_h1(pr, u);
    const double E = eval_action(pr, u, phi, a);
    const double grad_rel = dual / (1.0 + std::abs(E));
    const double mu_res = std::abs(detail::dot(rho, u)) / h2;
    const double ma = m_residual_gauge(pr, u, a);
    double a_scale = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) a_scale += std::abs(pr.phys.q * pr.phys.ell * a[k] * u[k] * u[k] * pr.wi[k]);
    const double ma_rel = a_scale > 0.0 ? std::abs(ma) / a_scale : std::abs(ma);
    gs.constraint_u = mu_res;
    gs.constraint_a = ma_rel;
    IterationRecord rec{E, grad_rel, mu_res, 0.0, 0};
    // the gauge constraint lags the fiber scaling by one step, so it tracks the gradient size
    if (grad_rel <= o.grad_tol && mu_res <= o.nehari_tol && ma_rel <= std::max(o.nehari_tol, o.grad_tol)) {
      gs.history.push_back(rec);
      gs.converged = true;
      break;
    }
    if (it >= o.max_iter) {
      gs.history.push_back(rec);
      break;
    }

    // (iii) descent in u along the frozen-gauge fiber maximum
    bool accepted = false;
    double a_try = alpha;
    for (int bt = 0; bt <= o.max_backtracks; ++bt) {
      ScalarField trial = u;
      for (std::size_t k = 0; k < trial.size(); ++k) trial[k] -= a_try * dd.direction()[k];
      try {
        ScalarField phi_t = phi;
        const double t2 = detail::fiber_argmax(pr, trial, a, o.nehari_tol, phi_t);
        for (auto& x : trial) x *= t2;
        phi_t = solve_phi(pr, trial, &phi_t);
        const double E2 = eval_action(pr, trial, phi_t, a);
        if (E2 <= E - o.armijo * a_try * dd.slope() + accepted_slack(o, E)) {
          u = std::move(trial);
          accepted = true;
          rec.step = a_try;
          rec.backtracks = bt;
          break;
        }
      } catch (const ConvergenceError&) {
      }
      a_try *= o.backtrack;
    }
    gs.history.push_back(rec);
    if (!accepted) {
      gs.stalled = true;
      break;
    }
    alpha = rec.backtracks == 0 ? std::min(o.max_step, 2.0 * a_try) : a_try;
    if (o.recentre && std::abs(axial_centroid(pr.grid, u)) > 0.5 * pr.grid.dz()) {
      u = recentre(pr.grid, u).u;
      dd.reset();
    }
  }
  gs.iterations = static_cast<int>(gs.history.size()) - 1;
  gs.state = reduce(pr, u, &rs);
  finalize(pr, gs);
  return gs;
}

/// Dispatches on opts.route.
inline GroundState solve_ground_state(const Problem& pr, const SolveOptions& o,
                                      std::optional<ScalarField> initial = std::nullopt) {
  if (o.route == Route::None) throw ConfigError("no solver route selected");
  return o.route == Route::MountainPass ? mountain_pass_search(pr, o, std::move(initial))
                                        : minimize_ground_state(pr, o, std::move(initial));
}

}  // namespace kgm
