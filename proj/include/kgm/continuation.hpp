#pragma once

// Proca-mass continuation mu -> 0 with warm starts, plus the fixed-u gauge
// energy comparison K_mu(a^mu) <= K_mu(a^mu') <= K_mu'(a^mu') for mu <= mu'.

#include <algorithm>
#include <cmath>
#include <vector>

#include "kgm/optimizer.hpp"

namespace kgm {

inline std::vector<double> default_mu_schedule(int levels = 10) {
  std::vector<double> s;
  for (int k = 0; k <= levels; ++k) s.push_back(std::ldexp(1.0, -k));
  s.push_back(0.0);
  return s;
}

inline void validate_schedule(const std::vector<double>& mu) {
  if (mu.empty()) throw ConfigError("mu schedule is empty");
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (!(mu[k] >= 0.0 && mu[k] <= 1.0)) throw ConfigError("mu schedule entries must lie in [0,1]");
    if (k > 0 && !(mu[k] < mu[k - 1])) throw ConfigError("mu schedule must be strictly decreasing");
  }
}

struct ContinuationEntry {
  double mu = 0.0;
  double energy = 0.0;
  double l2_norm = 0.0;
  double lp_norm = 0.0;
  double energy_at_reference = 0.0;  // J_mu of the first converged profile, no direction asserted
  PdeResiduals residuals;
  double nehari_rel = 0.0;
  double nsecond = 0.0;
  int iterations = 0;
  bool converged = false;
  bool cold_restart = false;
};

struct ContinuationStep {
  double h1 = 0.0;   // ||u_{k+1} - u_k||_H
  double phi = 0.0;  // Dirichlet-form norm of the phi difference
  double a = 0.0;    // gauge-form norm of the a difference
};

struct ContinuationReport {
  std::vector<double> schedule;
  std::vector<ContinuationEntry> entries;
  std::vector<ContinuationStep> diffs;
  double energy_cap = 0.0;  // sup_t of the decoupled functional along the seed ray
  bool bounded = false;
  GroundState terminal;
  double cold_terminal_energy = 0.0;
  bool cold_checked = false;
};

struct ContinuationOptions {
  SolveOptions solve;
  bool cold_check = false;  // re-solve the last entry from the seed for comparison
};

namespace detail {

inline double lp_norm(const Problem& pr, std::span<const double> u, double p) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += std::pow(std::abs(u[k]), p) * pr.wc[k];
  return std::pow(s, 1.0 / p);
}

inline double diff_norm(const SparseOperator& A, std::span<const double> x, std::span<const double> y) {
  std::vector<double> d(x.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = x[k] - y[k];
  return std::sqrt(std::max(0.0, A.quadratic_form(d)));
}

}  // namespace detail

inline ContinuationEntry summarize(const Problem& pr, double mu, const GroundState& gs) {
  ContinuationEntry e;
  e.mu = mu;
  e.energy = gs.energy.total;
  e.l2_norm = std::sqrt(gs.state.u2);
  e.lp_norm = detail::lp_norm(pr, gs.state.u, pr.nl.max_exponent());
  e.residuals = gs.residuals;
  e.nehari_rel = std::abs(gs.nehari.N) / gs.h1_norm_sq;
  e.nsecond = gs.nehari.Nsecond;
  e.iterations = gs.iterations;
  e.converged = gs.converged;
  return e;
}

inline ContinuationReport sweep_mu(const Problem& base, const std::vector<double>& schedule,
                                   const ContinuationOptions& opts = {}) {
  validate_schedule(schedule);
  ContinuationReport rep;
  rep.schedule = schedule;
  const ScalarField seed = make_seed(base.grid, base.phys.ell, opts.solve.seed);
  rep.energy_cap = decoupled_cap_sup(base, seed);

  GroundState prev;
  bool have_prev = false;
  ScalarField reference;
  for (double mu : schedule) {
    const Problem pr = with_mu(base, mu);
    std::optional<ScalarField> start;
    if (have_prev && prev.converged) start = recentre(pr.grid, prev.state.u).u;
    GroundState gs = solve_ground_state(pr, opts.solve, start);
    ContinuationEntry e = summarize(pr, mu, gs);
    e.cold_restart = !start.has_value();
    if (reference.empty() && gs.converged) reference = gs.state.u;
    if (!reference.empty()) e.energy_at_reference = eval_reduced(pr, reduce(pr, reference)).total;
    if (have_prev) {
      rep.diffs.push_back({detail::diff_norm(base.h1, gs.state.u, prev.state.u),
                           detail::diff_norm(base.lap, gs.state.phi, prev.state.phi),
                           detail::diff_norm(base.curl, gs.state.a, prev.state.a)});
    }
    rep.entries.push_back(e);
    prev = std::move(gs);
    have_prev = true;
  }
  rep.bounded = std::all_of(rep.entries.begin(), rep.entries.end(),
                            [&](const ContinuationEntry& e) { return e.energy <= rep.energy_cap; });
  rep.terminal = std::move(prev);
  if (opts.cold_check) {
    const Problem pr = with_mu(base, schedule.back());
    rep.cold_terminal_energy = solve_ground_state(pr, opts.solve).energy.total;
    rep.cold_checked = true;
  }
  return rep;
}

/// K_mu(a) = ||curl A||^2/2 + mu^2 ||A||^2/2 + q^2/2 \int a^2 u^2/r^2 - q l \int a u^2/r^2.
inline double gauge_energy(const Problem& pr, std::span<const double> u, std::span<const double> a, double mu) {
  const auto& p = pr.phys;
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double uu = u[k] * u[k];
    s += (0.5 * (mu * mu + p.q * p.q * uu) * a[k] * a[k] - p.q * p.ell * a[k] * uu) * pr.wi[k];
  }
  return 0.5 * pr.curl.quadratic_form(a) + s;
}

struct GaugeChainCheck {
  double mu = 0.0, mu_prime = 0.0;  // mu <= mu_prime
  double k_own = 0.0;               // K_mu(a^mu)
  double k_cross = 0.0;             // K_mu(a^mu')
  double k_other = 0.0;             // K_mu'(a^mu')
  double violation = 0.0;           // relative
  bool pass = false;
};

inline std::vector<GaugeChainCheck> gauge_energy_monotonicity_check(const Problem& pr, std::span<const double> u,
                                                                    std::vector<double> mu_list,
                                                                    double tol = 1e-8) {
  if (detail::all_zero(u)) throw ConfigError("gauge chain check needs a nonzero u");
  std::vector<ScalarField> a(mu_list.size());
  for (std::size_t k = 0; k < mu_list.size(); ++k) a[k] = solve_gauge(with_mu(pr, mu_list[k]), u);
  std::vector<GaugeChainCheck> out;
  for (std::size_t i = 0; i < mu_list.size(); ++i)
    for (std::size_t j = 0; j < mu_list.size(); ++j) {
      if (i == j && mu_list.size() > 1) continue;
      if (mu_list[i] > mu_list[j] || (mu_list[i] == mu_list[j] && i > j)) continue;
      GaugeChainCheck c;
      c.mu = mu_list[i];
      c.mu_prime = mu_list[j];
      c.k_own = gauge_energy(pr, u, a[i], c.mu);
      c.k_cross = gauge_energy(pr, u, a[j], c.mu);
      c.k_other = gauge_energy(pr, u, a[j], c.mu_prime);
      const double scale = std::max({std::abs(c.k_own), std::abs(c.k_cross), std::abs(c.k_other), 1e-300});
      c.violation = std::max({0.0, c.k_own - c.k_cross, c.k_cross - c.k_other}) / scale;
      c.pass = c.violation <= tol;
      out.push_back(c);
    }
  return out;
}

}  // namespace kgm
