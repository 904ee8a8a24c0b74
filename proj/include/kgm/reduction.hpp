#pragma once

// Reduced fields of a matter amplitude u: the electrostatic potential phi_u and
// the azimuthal gauge amplitude a_u (A_u = a_u grad(theta)), together with
// their derivative fields psi_u = Phi'(u)[u]/2 and Psi_u = A'(u)[u]/2.
//
// The discrete systems are the Euler-Lagrange equations of symmetric
// quadratic forms, so the energy identities below hold to linear-solver
// tolerance rather than to discretization error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "kgm/linsolve.hpp"
#include "kgm/meshgrid.hpp"
#include "kgm/model.hpp"

namespace kgm {

struct WorkCounter {
  std::atomic<long> solves{0};
  std::atomic<long> cg_iterations{0};
};

/// Grid, parameters and the u-independent operators shared by every solve.
struct Problem {
  CylGrid grid;
  PhysParams phys;
  Nonlinearity nl;
  LinearSolveOptions lin;
  SparseOperator lap;   // r-weighted gradient form, Dirichlet outer boundary
  SparseOperator curl;  // gauge curl form
  SparseOperator h1;    // vortex norm Riesz map
  std::vector<double> wc, wi;  // nodal w_cyl, w_inv
  std::shared_ptr<WorkCounter> work = std::make_shared<WorkCounter>();

  std::size_t size() const { return grid.size(); }
};

inline Problem make_problem(const CylGrid& g, const PhysParams& p, const Nonlinearity& n,
                            LinearSolveOptions lin = {}) {
  validate(p);
  Problem pr;
  pr.grid = g;
  pr.phys = p;
  pr.nl = n;
  pr.lin = lin;
  pr.lap = assemble_laplacian(g);
  pr.curl = assemble_gauge_curl(g);
  pr.h1 = assemble_h1_operator(g, p);
  pr.wc.resize(g.size());
  pr.wi.resize(g.size());
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) {
      pr.wc[g.index(i, j)] = g.w_cyl(i);
      pr.wi[g.index(i, j)] = g.w_inv(i);
    }
  return pr;
}

/// Same grid and operators, different Proca mass.
inline Problem with_mu(const Problem& base, double mu) {
  Problem pr = base;
  pr.phys.mu = mu;
  return pr;
}

inline SolveStats counted_solve(const Problem& pr, const SparseOperator& A, std::span<const double> b,
                                std::span<double> x, std::optional<double> tol = std::nullopt) {
  LinearSolveOptions o = pr.lin;
  if (tol) o.tol = *tol;
  const auto st = spd_solve_into(A, b, x, o);
  pr.work->solves += 1;
  pr.work->cg_iterations += st.iterations;
  return st;
}

/// Residuals and slacks of the reduction identities and bounds.
struct ReductionCheck {
  double energy_identity_phi = 0.0;    // ||grad phi||^2 + mu^2||phi||^2 = q \int (w - q phi) phi u^2
  double energy_identity_gauge = 0.0;  // curl + mass energy = q \int (l - q a) a u^2 / r^2
  double vortex_identity = 0.0;        // gauge energy + \int (l - q a)^2 u^2/r^2 = l^2 \int u^2/r^2 - l q \int a u^2/r^2
  double phi_bound_slack = 0.0;        // 0 <= phi <= w/q
  double gauge_bound_slack = 0.0;      // 0 <= sgn(l) a <= |l|/q
  double gauge_chain_slack = 0.0;      // 0 <= q^2 \int a^2 u^2/r^2 <= l q \int a u^2/r^2 <= l^2 \int u^2/r^2
  double phi_energy_bound_slack = 0.0; // ||grad phi||^2 + mu^2||phi||^2 <= w^2 ||u||^2
};

struct ReducedState {
  ScalarField u, phi, a;
  double grad_phi_sq = 0.0;     // ||grad phi||^2
  double mass_phi_sq = 0.0;     // mu^2 ||phi||^2
  double curl_energy = 0.0;     // ||curl A||^2
  double gauge_mass = 0.0;      // mu^2 ||A||^2
  double phi_u2 = 0.0;          // \int phi u^2
  double a_u2_r2 = 0.0;         // \int grad(theta).A u^2 = \int a u^2 / r^2
  double q2_phi2_u2 = 0.0;      // q^2 \int phi^2 u^2
  double q2_a2_u2_r2 = 0.0;     // q^2 \int |A|^2 u^2
  double u2 = 0.0;              // ||u||^2
  double u2_r2 = 0.0;           // \int u^2 / r^2
  SolveStats phi_stats, gauge_stats;
  ReductionCheck check;
};

namespace detail {

inline double rel_gap(double lhs, double rhs) {
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  return scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
}

inline std::vector<double> weighted_u2(const Problem&, std::span<const double> u, double coeff,
                                       const std::vector<double>& w) {
  std::vector<double> b(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) b[k] = coeff * u[k] * u[k] * w[k];
  return b;
}

inline bool all_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace detail

inline SparseOperator phi_operator(const Problem& pr, std::span<const double> u) {
  return pr.lap.with_diagonal_added(coupling_mass(pr.grid, pr.phys, u, Measure::Cyl));
}

inline SparseOperator gauge_operator(const Problem& pr, std::span<const double> u) {
  return pr.curl.with_diagonal_added(coupling_mass(pr.grid, pr.phys, u, Measure::InvR));
}

/// Solves (-Laplacian + mu^2 + q^2 u^2) phi = q w u^2.
inline ScalarField solve_phi(const Problem& pr, std::span<const double> u, const ScalarField* warm = nullptr,
                             SolveStats* stats = nullptr) {
  check_size(pr.grid, u);
  ScalarField phi = warm ? *warm : pr.grid.zeros();
  const auto b = detail::weighted_u2(pr, u, pr.phys.q * pr.phys.omega, pr.wc);
  if (detail::all_zero(b)) {
    std::fill(phi.begin(), phi.end(), 0.0);
    if (stats) *stats = {};
    return phi;
  }
  const auto st = counted_solve(pr, phi_operator(pr, u), b, phi);
  if (stats) *stats = st;
  return phi;
}

/// Solves the scalar gauge system with right-hand side q l u^2 / r. For u = 0
/// (including the degenerate mu = 0 case) the amplitude is a = 0.
inline ScalarField solve_gauge(const Problem& pr, std::span<const double> u, const ScalarField* warm = nullptr,
                               SolveStats* stats = nullptr) {
  check_size(pr.grid, u);
  ScalarField a = warm ? *warm : pr.grid.zeros();
  const auto b = detail::weighted_u2(pr, u, pr.phys.q * pr.phys.ell, pr.wi);
  if (detail::all_zero(b)) {
    std::fill(a.begin(), a.end(), 0.0);
    if (stats) *stats = {};
    return a;
  }
  const auto st = counted_solve(pr, gauge_operator(pr, u), b, a);
  if (stats) *stats = st;
  return a;
}

/// psi_u: same operator as phi, right-hand side q (w - q phi) u^2.
inline ScalarField solve_psi(const Problem& pr, std::span<const double> u, std::span<const double> phi,
                             SolveStats* stats = nullptr) {
  check_size(pr.grid, u);
  check_size(pr.grid, phi);
  std::vector<double> b(u.size());
  for (std::size_t k = 0; k < u.size(); ++k)
    b[k] = pr.phys.q * (pr.phys.omega - pr.phys.q * phi[k]) * u[k] * u[k] * pr.wc[k];
  ScalarField psi(phi.begin(), phi.end());
  if (detail::all_zero(b)) {
    std::fill(psi.begin(), psi.end(), 0.0);
    if (stats) *stats = {};
    return psi;
  }
  const auto st = counted_solve(pr, phi_operator(pr, u), b, psi);
  if (stats) *stats = st;
  return psi;
}

/// Psi-hat: gauge operator, right-hand side q (l - q a) u^2 / r.
inline ScalarField solve_gauge_prime(const Problem& pr, std::span<const double> u, std::span<const double> a,
                                     SolveStats* stats = nullptr) {
  check_size(pr.grid, u);
  check_size(pr.grid, a);
  std::vector<double> b(u.size());
  for (std::size_t k = 0; k < u.size(); ++k)
    b[k] = pr.phys.q * (pr.phys.ell - pr.phys.q * a[k]) * u[k] * u[k] * pr.wi[k];
  ScalarField out(a.begin(), a.end());
  if (detail::all_zero(b)) {
    std::fill(out.begin(), out.end(), 0.0);
    if (stats) *stats = {};
    return out;
  }
  const auto st = counted_solve(pr, gauge_operator(pr, u), b, out);
  if (stats) *stats = st;
  return out;
}

/// Caches every integral of (u, phi, a) that the functionals need and
/// evaluates the identity residuals.
inline void refresh_integrals(const Problem& pr, ReducedState& rs) {
  const auto& p = pr.phys;
  const auto& u = rs.u;
  const auto& phi = rs.phi;
  const auto& a = rs.a;
  const double l = p.ell;
  rs.grad_phi_sq = pr.lap.quadratic_form(phi);
  rs.curl_energy = pr.curl.quadratic_form(a);
  double phi2 = 0, a2 = 0, phi_u2 = 0, a_u2 = 0, p2u2 = 0, a2u2 = 0, u2 = 0, u2r2 = 0;
  double coupling_phi = 0, coupling_gauge = 0, vortex_mismatch = 0;
  double phi_slack = 0, gauge_slack = 0;
  const double phi_cap = p.q > 0 ? p.omega / p.q : std::numeric_limits<double>::infinity();
  const double gauge_cap = p.q > 0 ? std::abs(l) / p.q : std::numeric_limits<double>::infinity();
  const double sgn = l > 0 ? 1.0 : -1.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double uu = u[k] * u[k];
    phi2 += phi[k] * phi[k] * pr.wc[k];
    a2 += a[k] * a[k] * pr.wi[k];
    phi_u2 += phi[k] * uu * pr.wc[k];
    a_u2 += a[k] * uu * pr.wi[k];
    p2u2 += phi[k] * phi[k] * uu * pr.wc[k];
    a2u2 += a[k] * a[k] * uu * pr.wi[k];
    u2 += uu * pr.wc[k];
    u2r2 += uu * pr.wi[k];
    coupling_phi += (p.omega - p.q * phi[k]) * phi[k] * uu * pr.wc[k];
    coupling_gauge += (l - p.q * a[k]) * a[k] * uu * pr.wi[k];
    vortex_mismatch += (l - p.q * a[k]) * (l - p.q * a[k]) * uu * pr.wi[k];
    phi_slack = std::max({phi_slack, -phi[k], phi[k] - phi_cap});
    const double sa = sgn * a[k];
    gauge_slack = std::max({gauge_slack, -sa, sa - gauge_cap});
  }
  rs.mass_phi_sq = p.mu * p.mu * phi2;
  rs.gauge_mass = p.mu * p.mu * a2;
  rs.phi_u2 = phi_u2;
  rs.a_u2_r2 = a_u2;
  rs.q2_phi2_u2 = p.q * p.q * p2u2;
  rs.q2_a2_u2_r2 = p.q * p.q * a2u2;
  rs.u2 = u2;
  rs.u2_r2 = u2r2;

  auto& c = rs.check;
  c.energy_identity_phi = detail::rel_gap(rs.grad_phi_sq + rs.mass_phi_sq, p.q * coupling_phi);
  c.energy_identity_gauge = detail::rel_gap(rs.curl_energy + rs.gauge_mass, p.q * coupling_gauge);
  c.vortex_identity =
      detail::rel_gap(rs.curl_energy + rs.gauge_mass + vortex_mismatch, l * l * u2r2 - l * p.q * a_u2);
  // slacks are reported relative to the natural scale of each bound
  c.phi_bound_slack = std::isfinite(phi_cap) && phi_cap > 0 ? phi_slack / phi_cap : phi_slack;
  c.gauge_bound_slack = std::isfinite(gauge_cap) ? gauge_slack / gauge_cap : gauge_slack;
  const double t1 = rs.q2_a2_u2_r2, t2 = l * p.q * a_u2, t3 = l * l * u2r2;
  c.gauge_chain_slack = t3 > 0 ? std::max({0.0, -t1, t1 - t2, t2 - t3}) / t3 : 0.0;
  const double cap = p.omega * p.omega * u2;
  c.phi_energy_bound_slack = cap > 0 ? std::max(0.0, rs.grad_phi_sq + rs.mass_phi_sq - cap) / cap : 0.0;
}

/// phi_u and a_u for the given u, optionally warm-started from `warm`.
inline ReducedState reduce(const Problem& pr, std::span<const double> u, const ReducedState* warm = nullptr) {
  check_size(pr.grid, u);
  ReducedState rs;
  rs.u.assign(u.begin(), u.end());
  rs.phi = solve_phi(pr, u, warm ? &warm->phi : nullptr, &rs.phi_stats);
  rs.a = solve_gauge(pr, u, warm ? &warm->a : nullptr, &rs.gauge_stats);
  refresh_integrals(pr, rs);
  return rs;
}

/// Derivative-field identities; psi and Psi-hat come from solve_psi and
/// solve_gauge_prime for the same state.
struct DerivativeCheck {
  double psi_identity = 0.0;        // w \int psi u^2 = \int (w - q phi) phi u^2
  double psi_bound_slack = 0.0;     // 0 <= psi <= phi
  double gauge_prime_identity = 0.0;  // l \int Psi u^2/r^2 = \int (l - q a) a u^2/r^2
  double gauge_prime_positivity = 0.0;  // q \int (l - q a) Psi u^2/r^2, must be >= 0
  double gauge_prime_energy = 0.0;  // the same quantity as a quadratic form, for comparison
};

inline DerivativeCheck check_derivatives(const Problem& pr, const ReducedState& rs, std::span<const double> psi,
                                         std::span<const double> gp) {
  const auto& p = pr.phys;
  DerivativeCheck c;
  double lhs = 0, rhs = 0, glhs = 0, grhs = 0, pos = 0, slack = 0, scale = 0;
  for (std::size_t k = 0; k < rs.u.size(); ++k) {
    const double uu = rs.u[k] * rs.u[k];
    lhs += p.omega * psi[k] * uu * pr.wc[k];
    rhs += (p.omega - p.q * rs.phi[k]) * rs.phi[k] * uu * pr.wc[k];
    glhs += p.ell * gp[k] * uu * pr.wi[k];
    grhs += (p.ell - p.q * rs.a[k]) * rs.a[k] * uu * pr.wi[k];
    pos += p.q * (p.ell - p.q * rs.a[k]) * gp[k] * uu * pr.wi[k];
    slack = std::max({slack, -psi[k], psi[k] - rs.phi[k]});
    scale = std::max(scale, std::abs(rs.phi[k]));
  }
  c.psi_identity = detail::rel_gap(lhs, rhs);
  c.psi_bound_slack = scale > 0 ? slack / scale : slack;
  c.gauge_prime_identity = detail::rel_gap(glhs, grhs);
  c.gauge_prime_positivity = pos;
  auto Ag = gauge_operator(pr, rs.u);
  c.gauge_prime_energy = Ag.quadratic_form(gp);
  return c;
}

}  // namespace kgm
