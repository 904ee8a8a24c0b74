#pragma once

// Action I(u, phi, A), the two-variable functional J(u, A) = I(u, phi_u, A),
// the reduced functional of u alone, its gradient and the Nehari quantities.
//
// Scalar gauge substitutions (A = a grad(theta), |grad(theta)|^2 = 1/r^2):
//   grad(theta).A u^2      -> a u^2 / r^2
//   |l grad(theta) - qA|^2 -> (l - q a)^2 / r^2

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "kgm/reduction.hpp"

namespace kgm {

struct EnergyBreakdown {
  double kinetic = 0.0;        // ||grad u||^2 / 2
  double mass = 0.0;           // (m^2 - w^2) ||u||^2 / 2
  double vortex = 0.0;         // l^2 \int u^2/r^2 / 2
  double electrostatic = 0.0;  // q w \int phi u^2 / 2
  double gauge = 0.0;          // -l q \int a u^2/r^2 / 2
  double potential = 0.0;      // -\int F(u)
  double total = 0.0;
};

struct NehariDiagnostics {
  double N = 0.0;            // J'(u)[u]
  double Nsecond = 0.0;      // d/du (J'(u)[u]) [u]
  double grad_dual = 0.0;    // ||J'(u)||_{H^-1}
  double m_residual_u = 0.0; // d_u J(u, a)[u]
  double m_residual_a = 0.0; // d_a J(u, a)[a]
};

inline double potential_integral(const Problem& pr, std::span<const double> u) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += pr.nl.F(u[k]) * pr.wc[k];
  return s;
}

inline double norm_sq_h1(const Problem& pr, std::span<const double> u) { return pr.h1.quadratic_form(u); }

inline EnergyBreakdown eval_reduced(const Problem& pr, const ReducedState& rs) {
  const auto& p = pr.phys;
  EnergyBreakdown e;
  e.kinetic = 0.5 * pr.lap.quadratic_form(rs.u);
  e.mass = 0.5 * p.mass_gap() * rs.u2;
  e.vortex = 0.5 * p.ell * p.ell * rs.u2_r2;
  e.electrostatic = 0.5 * p.q * p.omega * rs.phi_u2;
  e.gauge = -0.5 * p.ell * p.q * rs.a_u2_r2;
  e.potential = -potential_integral(pr, rs.u);
  e.total = e.kinetic + e.mass + e.vortex + e.electrostatic + e.gauge + e.potential;
  return e;
}

/// I(u, phi, a grad(theta)). Stationary in phi and a at the reduced fields,
/// so it is insensitive to linear-solver error there.
inline double eval_action(const Problem& pr, std::span<const double> u, std::span<const double> phi,
                          std::span<const double> a) {
  const auto& p = pr.phys;
  double mass = 0, phi2 = 0, a2 = 0, vort = 0, elec = 0, pot = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double uu = u[k] * u[k];
    mass += uu * pr.wc[k];
    phi2 += phi[k] * phi[k] * pr.wc[k];
    a2 += a[k] * a[k] * pr.wi[k];
    vort += (p.ell - p.q * a[k]) * (p.ell - p.q * a[k]) * uu * pr.wi[k];
    elec += (p.omega - p.q * phi[k]) * (p.omega - p.q * phi[k]) * uu * pr.wc[k];
    pot += pr.nl.F(u[k]) * pr.wc[k];
  }
  return 0.5 * pr.lap.quadratic_form(u) + 0.5 * p.m * p.m * mass - 0.5 * pr.lap.quadratic_form(phi) -
         0.5 * p.mu * p.mu * phi2 + 0.5 * pr.curl.quadratic_form(a) + 0.5 * p.mu * p.mu * a2 + 0.5 * vort -
         0.5 * elec - pot;
}

/// J(u, a) with phi = phi_u taken from `phi_u`.
inline double eval_two_var(const Problem& pr, std::span<const double> u, std::span<const double> phi_u,
                           std::span<const double> a) {
  const auto& p = pr.phys;
  double mass = 0, elec = 0, a2 = 0, vort = 0, pot = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double uu = u[k] * u[k];
    mass += uu * pr.wc[k];
    elec += phi_u[k] * uu * pr.wc[k];
    a2 += a[k] * a[k] * pr.wi[k];
    vort += (p.ell - p.q * a[k]) * (p.ell - p.q * a[k]) * uu * pr.wi[k];
    pot += pr.nl.F(u[k]) * pr.wc[k];
  }
  return 0.5 * pr.lap.quadratic_form(u) + 0.5 * p.mass_gap() * mass + 0.5 * p.q * p.omega * elec +
         0.5 * pr.curl.quadratic_form(a) + 0.5 * p.mu * p.mu * a2 + 0.5 * vort - pot;
}

/// Weak residual of the u-equation, rho_k = d I / d u_k at (u, phi, a):
/// <rho, v> = \int grad u.grad v + [m^2 - (w - q phi)^2] u v + (l - q a)^2 u v / r^2 - f(u) v.
inline ScalarField u_residual(const Problem& pr, std::span<const double> u, std::span<const double> phi,
                              std::span<const double> a) {
  const auto& p = pr.phys;
  ScalarField rho = pr.lap.apply(u);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double e = p.omega - p.q * phi[k];
    const double v = p.ell - p.q * a[k];
    rho[k] += (p.m * p.m - e * e) * u[k] * pr.wc[k] + v * v * u[k] * pr.wi[k] - pr.nl.f(u[k]) * pr.wc[k];
  }
  return rho;
}

/// Reduced gradient: phi_u and a_u are stationary points of I, so the
/// derivative of the reduced functional is the partial derivative in u.
inline ScalarField grad_reduced(const Problem& pr, const ReducedState& rs) {
  return u_residual(pr, rs.u, rs.phi, rs.a);
}

struct SobolevGradient {
  ScalarField direction;  // H^{-1} rho
  double dual_norm = 0.0; // sqrt(rho . H^{-1} rho)
};

inline SobolevGradient sobolev_gradient(const Problem& pr, std::span<const double> rho,
                                        const ScalarField* warm = nullptr) {
  SobolevGradient g;
  g.direction = warm ? *warm : pr.grid.zeros();
  counted_solve(pr, pr.h1, rho, g.direction);
  g.dual_norm = std::sqrt(std::max(0.0, detail::dot(rho, g.direction)));
  return g;
}

inline double m_residual_gauge(const Problem& pr, std::span<const double> u, std::span<const double> a) {
  const auto& p = pr.phys;
  double s = pr.curl.quadratic_form(a);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double uu = u[k] * u[k];
    s += (p.mu * p.mu + p.q * p.q * uu) * a[k] * a[k] * pr.wi[k] - p.q * p.ell * a[k] * uu * pr.wi[k];
  }
  return s;
}

/// Nehari value, its derivative along the ray, the gradient dual norm and the
/// two constraint residuals. `psi` and `gauge_prime` come from solve_psi and
/// solve_gauge_prime for the same state.
inline NehariDiagnostics nehari_quantities(const Problem& pr, const ReducedState& rs, std::span<const double> psi,
                                           std::span<const double> gauge_prime, bool with_gradient = true) {
  const auto& p = pr.phys;
  NehariDiagnostics d;
  const auto& u = rs.u;
  const double G = pr.lap.quadratic_form(u);
  double elec = 0, vort = 0, fu = 0, dfu = 0, cross_gauge = 0, cross_phi = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double uu = u[k] * u[k];
    const double e = p.omega - p.q * rs.phi[k];
    const double v = p.ell - p.q * rs.a[k];
    elec += (p.m * p.m - e * e) * uu * pr.wc[k];
    vort += v * v * uu * pr.wi[k];
    fu += pr.nl.f(u[k]) * u[k] * pr.wc[k];
    dfu += pr.nl.df(u[k]) * uu * pr.wc[k];
    cross_gauge += v * gauge_prime[k] * uu * pr.wi[k];
    cross_phi += e * psi[k] * uu * pr.wc[k];
  }
  d.N = G + elec + vort - fu;
  d.Nsecond = 2 * G + 2 * elec + 2 * vort - 4 * p.q * cross_gauge + 4 * p.q * cross_phi - fu - dfu;
  d.m_residual_u = d.N;
  d.m_residual_a = m_residual_gauge(pr, u, rs.a);
  if (with_gradient) d.grad_dual = sobolev_gradient(pr, grad_reduced(pr, rs)).dual_norm;
  return d;
}

/// N(u) without derivative fields.
inline double nehari_value(const Problem& pr, const ReducedState& rs) {
  const auto rho = grad_reduced(pr, rs);
  return detail::dot(rho, rs.u);
}

struct FiberValue {
  double j = 0.0;     // J(t u, a)
  double jbar = 0.0;  // j'(t) / t^3
};

/// Fiber t -> J(t u, a) with phi re-solved at t u and the gauge frozen.
inline FiberValue mountain_pass_fiber(const Problem& pr, std::span<const double> u, std::span<const double> a_fixed,
                                      double t, ScalarField* phi_cache = nullptr) {
  if (!(t > 0.0)) throw ConfigError("fiber parameter t must be positive");
  ScalarField tu(u.begin(), u.end());
  for (auto& x : tu) x *= t;
  ScalarField phi = solve_phi(pr, tu, phi_cache);
  if (phi_cache) *phi_cache = phi;
  FiberValue fv;
  fv.j = eval_two_var(pr, tu, phi, a_fixed);
  const auto rho = u_residual(pr, tu, phi, a_fixed);
  fv.jbar = detail::dot(rho, u) / (t * t * t);
  return fv;
}

/// Functional with both couplings removed and the full mass m^2; bounds the
/// reduced functional from above for every mu.
inline double eval_decoupled_cap(const Problem& pr, std::span<const double> u) {
  const auto& p = pr.phys;
  double mass = 0, u2r2 = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    mass += u[k] * u[k] * pr.wc[k];
    u2r2 += u[k] * u[k] * pr.wi[k];
  }
  return 0.5 * pr.lap.quadratic_form(u) + 0.5 * p.m * p.m * mass + 0.5 * p.ell * p.ell * u2r2 -
         potential_integral(pr, u);
}

/// sup_{t >= 0} of eval_decoupled_cap(t u): geometric scan, then golden section.
inline double decoupled_cap_sup(const Problem& pr, std::span<const double> u) {
  const double quad = 2.0 * (eval_decoupled_cap(pr, u) + potential_integral(pr, u));
  auto h = [&](double t) {
    double pot = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) pot += pr.nl.F(t * u[k]) * pr.wc[k];
    return 0.5 * t * t * quad - pot;
  };
  double best_t = 0.0, best = 0.0;
  const int n = 241;
  for (int k = 0; k < n; ++k) {
    const double t = std::pow(10.0, -3.0 + 6.0 * k / (n - 1));
    const double v = h(t);
    if (v > best) best = v, best_t = t;
  }
  if (best_t == 0.0) return 0.0;
  double lo = best_t / std::pow(10.0, 6.0 / (n - 1)), hi = best_t * std::pow(10.0, 6.0 / (n - 1));
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = h(x1), f2 = h(x2);
  for (int it = 0; it < 100; ++it) {
    if (f1 > f2) {
      hi = x2, x2 = x1, f2 = f1, x1 = hi - gr * (hi - lo), f1 = h(x1);
    } else {
      lo = x1, x1 = x2, f1 = f2, x2 = lo + gr * (hi - lo), f2 = h(x2);
    }
  }
  return std::max(best, std::max(f1, f2));
}

}  // namespace kgm
