#pragma once

// Invariant suite: reduction identities and bounds on probe fields, Nehari
// and stationarity certificates on converged states, mountain-pass geometry
// spot checks, and the fixed-u gauge energy chain.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "kgm/continuation.hpp"
#include "kgm/optimizer.hpp"

namespace kgm {

enum class CheckKind { Identity, Inequality, Report };

inline std::string kind_name(CheckKind k) {
  switch (k) {
    case CheckKind::Identity: return "identity";
    case CheckKind::Inequality: return "inequality";
    case CheckKind::Report: return "report";
  }
  return "unknown";
}

struct InvariantResult {
  std::string name;
  std::string reference;  // which property the check encodes
  CheckKind kind = CheckKind::Identity;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = true;
  bool skipped = false;
};

struct SuiteOptions {
  double identity_tol = 1e-8;
  double slack_tol = 1e-6;
  double nehari_tol = 1e-8;
  double residual_tol = 1e-6;
};

namespace detail {

inline InvariantResult le_check(std::string name, std::string ref, CheckKind kind, double measured, double threshold) {
  InvariantResult r{std::move(name), std::move(ref), kind, measured, threshold, measured <= threshold, false};
  return r;
}

inline InvariantResult report(std::string name, std::string ref, double measured) {
  return {std::move(name), std::move(ref), CheckKind::Report, measured, 0.0, true, false};
}

inline double lp_integral(const Problem& pr, std::span<const double> u, double p) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += std::pow(std::abs(u[k]), p) * pr.wc[k];
  return s;
}

}  // namespace detail

/// Smooth random probes: r^|l| times a sum of signed Gaussian bumps.
inline std::vector<ScalarField> random_probes(const CylGrid& g, int ell, int count, std::uint64_t seed) {
  Uniform01 rng(seed);
  std::vector<ScalarField> out;
  const double span_r = std::min(g.R(), 4.0), span_z = std::min(g.L(), 3.0);
  for (int c = 0; c < count; ++c) {
    struct Bump {
      double r, z, w, amp;
    };
    std::vector<Bump> b;
    const int nb = 1 + static_cast<int>(3 * rng());
    for (int k = 0; k < nb; ++k)
      b.push_back({rng(0.0, 0.6 * span_r), rng(-0.6 * span_z, 0.6 * span_z), rng(0.6, 1.6), rng(-1.0, 2.0)});
    const double scale = rng(0.2, 3.0);
    out.push_back(g.sample([&](double r, double z) {
      double s = 0.0;
      for (const auto& x : b) s += x.amp * std::exp(-((r - x.r) * (r - x.r) + (z - x.z) * (z - x.z)) / (x.w * x.w));
      return scale * std::pow(r, std::abs(ell)) * s;
    }));
  }
  return out;
}

/// Reduction identities and pointwise bounds for one field.
inline std::vector<InvariantResult> probe_checks(const Problem& pr, std::span<const double> u, const std::string& tag,
                                                 const SuiteOptions& o = {}) {
  using detail::le_check;
  std::vector<InvariantResult> out;
  const char* names[] = {"phi_energy_identity", "gauge_energy_identity", "vortex_identity", "psi_identity",
                         "gauge_prime_identity", "gauge_prime_energy_identity", "phi_bound",
                         "psi_bound", "gauge_bound", "gauge_chain", "phi_energy_bound"};
  if (detail::all_zero(u)) {
    for (const char* n : names) {
      InvariantResult r;
      r.name = tag + ":" + n;
      r.reference = "zero field";
      r.skipped = true;
      out.push_back(r);
    }
    return out;
  }
  const auto rs = reduce(pr, u);
  const auto psi = solve_psi(pr, u, rs.phi);
  const auto gp = solve_gauge_prime(pr, u, rs.a);
  const auto dc = check_derivatives(pr, rs, psi, gp);
  const auto& c = rs.check;
  const auto id = CheckKind::Identity;
  const auto in = CheckKind::Inequality;
  out.push_back(le_check(tag + ":phi_energy_identity", "phi field energy equals its coupling", id,
                         c.energy_identity_phi, o.identity_tol));
  out.push_back(le_check(tag + ":gauge_energy_identity", "gauge field energy equals its coupling", id,
                         c.energy_identity_gauge, o.identity_tol));
  out.push_back(le_check(tag + ":vortex_identity", "gauge energy plus vortex mismatch", id, c.vortex_identity,
                         o.identity_tol));
  out.push_back(le_check(tag + ":psi_identity", "w int psi u^2 = int (w - q phi) phi u^2", id, dc.psi_identity,
                         o.identity_tol));
  out.push_back(le_check(tag + ":gauge_prime_identity", "l int grad(theta).Psi u^2 = int (l grad(theta) - qA).A u^2",
                         id, dc.gauge_prime_identity, o.identity_tol));
  out.push_back(le_check(tag + ":gauge_prime_energy_identity", "Psi energy equals q int (l grad(theta) - qA).Psi u^2",
                         id, detail::rel_gap(dc.gauge_prime_energy, dc.gauge_prime_positivity), o.identity_tol));
  out.push_back(le_check(tag + ":phi_bound", "0 <= phi <= w/q", in, c.phi_bound_slack, o.slack_tol));
  out.push_back(le_check(tag + ":psi_bound", "0 <= psi <= phi", in, dc.psi_bound_slack, o.slack_tol));
  out.push_back(le_check(tag + ":gauge_bound", "0 <= a <= l/q", in, c.gauge_bound_slack, o.slack_tol));
  out.push_back(le_check(tag + ":gauge_chain", "q^2 int a^2 u^2/r^2 <= l q int a u^2/r^2 <= l^2 int u^2/r^2", in,
                         c.gauge_chain_slack, o.slack_tol));
  out.push_back(le_check(tag + ":phi_energy_bound", "phi field energy <= w^2 ||u||^2", in, c.phi_energy_bound_slack,
                         o.slack_tol));
  // Sobolev-type bound with a fitted constant, informational only
  const double l125 = detail::lp_integral(pr, u, 12.0 / 5.0);
  out.push_back(detail::report(tag + ":phi_energy_sobolev_constant", "phi field energy / ||u||_{12/5}^4",
                               (rs.grad_phi_sq + rs.mass_phi_sq) / std::pow(l125, 5.0 / 3.0)));
  return out;
}

/// Certificates of a converged ground state.
inline std::vector<InvariantResult> state_checks(const Problem& pr, const GroundState& gs, const std::string& tag,
                                                 const SuiteOptions& o = {}) {
  using detail::le_check;
  const auto in = CheckKind::Inequality;
  std::vector<InvariantResult> out;
  const auto& p = pr.phys;
  const auto& rs = gs.state;
  const double sigma = pr.nl.sigma();
  const auto [cn, cb] = energy_coefficient_certificates(p, sigma);
  const double grad2 = pr.lap.quadratic_form(rs.u);

  out.push_back(le_check(tag + ":nehari", "|N(u)| <= tol ||u||^2", in, std::abs(gs.nehari.N) / gs.h1_norm_sq,
                         o.nehari_tol));
  out.push_back(le_check(tag + ":nsecond_negative", "N'(u)[u] < 0", in, gs.nehari.Nsecond, 0.0));
  out.back().pass = gs.nehari.Nsecond < 0.0;
  const double nc_bound = -(sigma - 2.0) * grad2 - cn * rs.u2;
  out.push_back(le_check(tag + ":nsecond_certificate", "N'(u)[u] <= -(s-2)||grad u||^2 - c ||u||^2", in,
                         (gs.nehari.Nsecond - nc_bound) / std::abs(nc_bound), 1e-10));
  const double lower = (sigma - 2.0) / (2.0 * sigma) * grad2 + cb / (2.0 * sigma) * rs.u2;
  out.push_back(le_check(tag + ":energy_lower_bound", "J(u) >= (s-2)/(2s)||grad u||^2 + c/(2s)||u||^2", in,
                         (lower - gs.energy.total) / std::abs(lower), 1e-10));
  out.push_back(le_check(tag + ":energy_positive", "J(u) > 0", in, -gs.energy.total, 0.0));
  out.back().pass = gs.energy.total > 0.0;
  out.push_back(le_check(tag + ":residual_u", "u-equation dual residual", in, gs.residuals.u, o.residual_tol));
  out.push_back(le_check(tag + ":residual_phi", "phi-equation dual residual", in, gs.residuals.phi, o.residual_tol));
  out.push_back(le_check(tag + ":residual_a", "gauge-equation dual residual", in, gs.residuals.a, o.residual_tol));
  out.push_back(detail::report(tag + ":lp_norm", "||u||_p on the Nehari set",
                               std::pow(detail::lp_integral(pr, rs.u, pr.nl.max_exponent()),
                                        1.0 / pr.nl.max_exponent())));

  // mountain-pass geometry of J(u, a) at the converged pair
  ScalarField phi_cache = rs.phi;
  const double J0 = mountain_pass_fiber(pr, rs.u, rs.a, 1.0, &phi_cache).j;
  double j1_min = std::numeric_limits<double>::infinity();
  for (double s : {1e-3, 3e-3, 1e-2, 3e-2}) {
    ScalarField su = detail::scaled(rs.u, s), sa = detail::scaled(rs.a, s);
    const auto phis = solve_phi(pr, su);
    j1_min = std::min(j1_min, eval_two_var(pr, su, phis, sa));
  }
  out.push_back(le_check(tag + ":mp_small_sphere", "J > 0 near the origin", in, -j1_min, 0.0));
  out.back().pass = j1_min > 0.0;
  double jT = std::numeric_limits<double>::infinity();
  for (double T = 2.0; T <= 1024.0 && !(jT < 0.0); T *= 2.0)
    jT = mountain_pass_fiber(pr, rs.u, rs.a, T, &phi_cache).j;
  out.push_back(le_check(tag + ":mp_negative_far", "J(T u, a) < 0 for some T", in, jT, 0.0));
  out.back().pass = jT < 0.0;
  double worst = 0.0;
  for (int k = 1; k <= 30; ++k) {
    const double t = 0.1 * k;
    worst = std::max(worst, mountain_pass_fiber(pr, rs.u, rs.a, t, &phi_cache).j - J0);
  }
  double ka_mass = 0.0;
  for (std::size_t k = 0; k < rs.a.size(); ++k) ka_mass += rs.a[k] * rs.a[k] * pr.wi[k];
  // J(0, s a) = s^2 J(0, a)
  const double J0a = 0.5 * (pr.curl.quadratic_form(rs.a) + p.mu * p.mu * ka_mass);
  worst = std::max(worst, J0a - J0);
  out.push_back(le_check(tag + ":mp_ray_maximum", "J(u,a) >= J(t u, a), J(0, s a)", in,
                         worst / std::max(1.0, std::abs(J0)), 1e-9));

  // fixed-u gauge energy chain over mu' <= pr mu
  std::vector<double> mus;
  for (double s : {0.0, 0.25, 0.5, 1.0}) mus.push_back(s * std::min(1.0, p.mu));
  mus.erase(std::unique(mus.begin(), mus.end()), mus.end());
  double chain = 0.0, kmax = -std::numeric_limits<double>::infinity();
  for (const auto& c : gauge_energy_monotonicity_check(pr, rs.u, mus)) {
    chain = std::max(chain, c.violation);
    kmax = std::max({kmax, c.k_own, c.k_other});
  }
  out.push_back(le_check(tag + ":gauge_energy_chain", "K_mu(a^mu) <= K_mu(a^mu') <= K_mu'(a^mu')", in, chain,
                         o.identity_tol));
  out.push_back(le_check(tag + ":gauge_energy_nonpositive", "K_mu(a^mu) <= 0", in, kmax, 0.0));
  return out;
}

inline std::vector<InvariantResult> run_suite(const Problem& pr, const std::vector<ScalarField>& probes,
                                              const std::vector<GroundState>& states = {},
                                              const SuiteOptions& o = {}) {
  std::vector<InvariantResult> out;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    auto r = probe_checks(pr, probes[k], "probe" + std::to_string(k), o);
    out.insert(out.end(), r.begin(), r.end());
  }
  for (std::size_t k = 0; k < states.size(); ++k) {
    const std::string tag = "state" + std::to_string(k);
    auto r = probe_checks(pr, states[k].state.u, tag, o);
    out.insert(out.end(), r.begin(), r.end());
    auto s = state_checks(pr, states[k], tag, o);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

/// Maximum-principle slacks of one analytic profile on a grid and on the grid
/// with both spacings halved.
struct SlackRefinement {
  double coarse_phi = 0, fine_phi = 0, coarse_psi = 0, fine_psi = 0;
  double coarse_gauge = 0, fine_gauge = 0, coarse_chain = 0, fine_chain = 0;
  double coarse_energy = 0, fine_energy = 0;
  double coarse_max() const { return std::max({coarse_phi, coarse_psi, coarse_gauge, coarse_chain, coarse_energy}); }
  double fine_max() const { return std::max({fine_phi, fine_psi, fine_gauge, fine_chain, fine_energy}); }
};

inline SlackRefinement slack_refinement(const Problem& pr, const std::function<double(double, double)>& profile) {
  SlackRefinement s;
  auto run = [&](const Problem& P, double& phi, double& psi, double& gauge, double& chain, double& energy) {
    const auto u = P.grid.sample(profile);
    const auto rs = reduce(P, u);
    const auto dc = check_derivatives(P, rs, solve_psi(P, u, rs.phi), solve_gauge_prime(P, u, rs.a));
    phi = rs.check.phi_bound_slack;
    psi = dc.psi_bound_slack;
    gauge = rs.check.gauge_bound_slack;
    chain = rs.check.gauge_chain_slack;
    energy = rs.check.phi_energy_bound_slack;
  };
  run(pr, s.coarse_phi, s.coarse_psi, s.coarse_gauge, s.coarse_chain, s.coarse_energy);
  const auto& g = pr.grid;
  const Problem fine = make_problem(build_grid(2 * g.nr(), 2 * g.nz(), g.R(), g.L()), pr.phys, pr.nl, pr.lin);
  run(fine, s.fine_phi, s.fine_psi, s.fine_gauge, s.fine_chain, s.fine_energy);
  return s;
}

inline bool all_pass(const std::vector<InvariantResult>& rs) {
  return std::all_of(rs.begin(), rs.end(), [](const InvariantResult& r) { return r.pass || r.skipped; });
}

}  // namespace kgm
