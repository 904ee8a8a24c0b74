#pragma once

// Brute-force Cartesian check of the axisymmetric reduction. The matter
// amplitude is lifted to a uniform 3D grid, phi and the gauge field
// A = (A1, A2, 0) are solved there with 7-point operators and Dirichlet walls,
// and every term of the action is compared with its cylindrical counterpart.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "kgm/functional.hpp"

namespace kgm {

/// Interior nodes x_i = -X + i h, h = 2X/N, i = 1..N-1. N odd keeps every
/// node off the axis x1 = x2 = 0.
class CartGrid3D {
 public:
  CartGrid3D(int intervals, double extent) : N_(intervals), X_(extent) {
    if (intervals < 3 || intervals % 2 == 0) throw ConfigError("oracle grid needs an odd interval count >= 3");
    if (intervals > 33) throw ConfigError("oracle grid is capped at 33 intervals per axis");
    if (!(extent > 0.0)) throw ConfigError("oracle extent must be positive");
    h_ = 2.0 * X_ / N_;
  }
  int intervals() const { return N_; }
  int n() const { return N_ - 1; }
  double extent() const { return X_; }
  double h() const { return h_; }
  double coord(int i) const { return -X_ + (i + 1) * h_; }
  std::size_t size() const { return static_cast<std::size_t>(n()) * n() * n(); }
  std::size_t index(int i, int j, int k) const { return (static_cast<std::size_t>(k) * n() + j) * n() + i; }
  double cell_volume() const { return h_ * h_ * h_; }

 private:
  int N_;
  double X_, h_;
};

/// Bilinear interpolation in (r, x3) from cell centres. Between the last
/// centre and the wall the value falls linearly to the Dirichlet value 0;
/// inside the first radial half cell it is held constant. Zero outside.
inline double interpolate_cyl(const CylGrid& g, std::span<const double> f, double r, double z) {
  if (r >= g.R() || std::abs(z) >= g.L()) return 0.0;
  // positions in index space; -0.5 / n - 0.5 are the walls (the axis is clamped)
  const double si = std::max(r / g.dr() - 0.5, 0.0);
  const double sj = (z + g.L()) / g.dz() - 0.5;
  auto value = [&](int i, int j) {
    if (i >= g.nr() || j < 0 || j >= g.nz()) return 0.0;
    return f[g.index(i, j)];
  };
  const int i0 = static_cast<int>(std::floor(si));
  const int j0 = static_cast<int>(std::floor(sj));
  double fr = si - i0, fz = sj - j0;
  // the wall sits half a cell beyond the last centre
  if (i0 == g.nr() - 1) fr *= 2.0;
  if (j0 == g.nz() - 1) fz *= 2.0;
  if (j0 == -1) fz = 2.0 * fz - 1.0;
  return (1 - fr) * (1 - fz) * value(i0, j0) + fr * (1 - fz) * value(i0 + 1, j0) +
         (1 - fr) * fz * value(i0, j0 + 1) + fr * fz * value(i0 + 1, j0 + 1);
}

inline std::vector<double> lift_to_3d(const CartGrid3D& g3, const CylGrid& g, std::span<const double> field) {
  check_size(g, field);
  std::vector<double> out(g3.size());
  for (int k = 0; k < g3.n(); ++k)
    for (int j = 0; j < g3.n(); ++j)
      for (int i = 0; i < g3.n(); ++i) {
        const double x = g3.coord(i), y = g3.coord(j);
        out[g3.index(i, j, k)] = interpolate_cyl(g, field, std::hypot(x, y), g3.coord(k));
      }
  return out;
}

namespace detail {

/// h * (graph Laplacian) + h^3 diag(c): the 7-point Dirichlet form.
inline SparseOperator cart_operator(const CartGrid3D& g3, std::span<const double> c) {
  const int n = g3.n();
  const double h = g3.h();
  std::vector<std::tuple<std::size_t, std::size_t, double>> t;
  t.reserve(g3.size() * 7);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t a = g3.index(i, j, k);
        t.emplace_back(a, a, 6.0 * h + c[a] * g3.cell_volume());
        if (i + 1 < n) t.emplace_back(a, g3.index(i + 1, j, k), -h), t.emplace_back(g3.index(i + 1, j, k), a, -h);
        if (j + 1 < n) t.emplace_back(a, g3.index(i, j + 1, k), -h), t.emplace_back(g3.index(i, j + 1, k), a, -h);
        if (k + 1 < n) t.emplace_back(a, g3.index(i, j, k + 1), -h), t.emplace_back(g3.index(i, j, k + 1), a, -h);
      }
  return SparseOperator(g3.size(), std::move(t));
}

inline std::vector<double> screening(const CartGrid3D& g3, const PhysParams& p, std::span<const double> u3) {
  std::vector<double> c(g3.size());
  for (std::size_t a = 0; a < c.size(); ++a) c[a] = p.mu * p.mu + p.q * p.q * u3[a] * u3[a];
  return c;
}

inline std::vector<double> cart_solve(const SparseOperator& A, std::span<const double> b) {
  std::vector<double> x(b.size(), 0.0);
  if (all_zero(b)) return x;
  spd_solve_into(A, b, x, {1e-11, 0});
  return x;
}

}  // namespace detail

inline std::vector<double> solve_phi_3d(const CartGrid3D& g3, const PhysParams& p, std::span<const double> u3) {
  const auto A = detail::cart_operator(g3, detail::screening(g3, p, u3));
  std::vector<double> b(g3.size());
  for (std::size_t a = 0; a < b.size(); ++a) b[a] = p.q * p.omega * u3[a] * u3[a] * g3.cell_volume();
  return detail::cart_solve(A, b);
}

struct Gauge3D {
  std::vector<double> A1, A2;
  double div_rel = 0.0;  // ||div A|| / ||grad A||
};

/// Componentwise -Laplacian A + (mu^2 + q^2 u^2) A = q l grad(theta) u^2.
inline Gauge3D solve_gauge_3d(const CartGrid3D& g3, const PhysParams& p, std::span<const double> u3) {
  const auto A = detail::cart_operator(g3, detail::screening(g3, p, u3));
  const int n = g3.n();
  std::vector<double> b1(g3.size()), b2(g3.size());
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t a = g3.index(i, j, k);
        const double x = g3.coord(i), y = g3.coord(j), rho2 = x * x + y * y;
        const double s = p.q * p.ell * u3[a] * u3[a] * g3.cell_volume() / rho2;
        b1[a] = -y * s;
        b2[a] = x * s;
      }
  Gauge3D out;
  out.A1 = detail::cart_solve(A, b1);
  out.A2 = detail::cart_solve(A, b2);

  auto at = [&](const std::vector<double>& f, int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n) return 0.0;
    return f[g3.index(i, j, k)];
  };
  const double h = g3.h();
  double div2 = 0.0, grad2 = 0.0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const double d = (at(out.A1, i + 1, j, k) - at(out.A1, i - 1, j, k) + at(out.A2, i, j + 1, k) -
                          at(out.A2, i, j - 1, k)) /
                         (2 * h);
        div2 += d * d;
      }
  for (const auto* f : {&out.A1, &out.A2})
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const double c = at(*f, i, j, k);
          for (double nb : {at(*f, i + 1, j, k), at(*f, i, j + 1, k), at(*f, i, j, k + 1)})
            grad2 += (nb - c) * (nb - c) / (h * h);
          // walls on the low side
          if (i == 0) grad2 += c * c / (h * h);
          if (j == 0) grad2 += c * c / (h * h);
          if (k == 0) grad2 += c * c / (h * h);
        }
  out.div_rel = grad2 > 0.0 ? std::sqrt(div2 / grad2) : 0.0;
  return out;
}

inline const std::array<std::string, 7>& action_term_names() {
  static const std::array<std::string, 7> names = {"kinetic", "mass",      "vortex_gauge", "electric",
                                                   "phi_field", "gauge_field", "potential"};
  return names;
}

using ActionTerms = std::array<double, 7>;

/// Terms of I(u, phi_u, A_u) on the cylindrical grid.
inline ActionTerms cylindrical_terms(const Problem& pr, const ReducedState& rs) {
  const auto& p = pr.phys;
  ActionTerms t{};
  t[0] = 0.5 * pr.lap.quadratic_form(rs.u);
  double mass = 0, vort = 0, elec = 0, phi2 = 0, a2 = 0;
  for (std::size_t k = 0; k < rs.u.size(); ++k) {
    const double uu = rs.u[k] * rs.u[k];
    mass += uu * pr.wc[k];
    vort += (p.ell - p.q * rs.a[k]) * (p.ell - p.q * rs.a[k]) * uu * pr.wi[k];
    elec += (p.omega - p.q * rs.phi[k]) * (p.omega - p.q * rs.phi[k]) * uu * pr.wc[k];
    phi2 += rs.phi[k] * rs.phi[k] * pr.wc[k];
    a2 += rs.a[k] * rs.a[k] * pr.wi[k];
  }
  t[1] = 0.5 * p.m * p.m * mass;
  t[2] = 0.5 * vort;
  t[3] = -0.5 * elec;
  t[4] = -0.5 * (pr.lap.quadratic_form(rs.phi) + p.mu * p.mu * phi2);
  t[5] = 0.5 * (pr.curl.quadratic_form(rs.a) + p.mu * p.mu * a2);
  t[6] = -potential_integral(pr, rs.u);
  return t;
}

struct OracleReport {
  ActionTerms cyl{}, cart{};
  ActionTerms rel_err{};
  double max_rel_err = 0.0;
  double div_rel = 0.0;
  double phi_bound_slack = 0.0;  // relative to w/q
  double l2_cyl = 0.0, l2_cart = 0.0;
};

inline double term_gap(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0.0 ? std::abs(a - b) / s : 0.0;
}

/// Every term of the action computed both ways. The Cartesian gauge-field
/// energy uses ||curl A||^2 = ||grad A||^2 - ||div A||^2 (Dirichlet walls).
inline OracleReport compare_energies(const CartGrid3D& g3, const Problem& pr, std::span<const double> u) {
  const auto& p = pr.phys;
  OracleReport rep;
  const ReducedState rs = reduce(pr, u);
  rep.cyl = cylindrical_terms(pr, rs);

  const auto u3 = lift_to_3d(g3, pr.grid, u);
  const auto phi3 = solve_phi_3d(g3, p, u3);
  const auto A = solve_gauge_3d(g3, p, u3);
  rep.div_rel = A.div_rel;

  const int n = g3.n();
  const double h = g3.h(), dv = g3.cell_volume();
  auto at = [&](const std::vector<double>& f, int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n) return 0.0;
    return f[g3.index(i, j, k)];
  };
  // sum over all edges of the closed grid, h (f_b - f_a)^2
  auto dirichlet = [&](const std::vector<double>& f) {
    double s = 0.0;
    for (int k = -1; k < n; ++k)
      for (int j = -1; j < n; ++j)
        for (int i = -1; i < n; ++i) {
          const double c = at(f, i, j, k);
          if (j >= 0 && k >= 0) s += (at(f, i + 1, j, k) - c) * (at(f, i + 1, j, k) - c);
          if (i >= 0 && k >= 0) s += (at(f, i, j + 1, k) - c) * (at(f, i, j + 1, k) - c);
          if (i >= 0 && j >= 0) s += (at(f, i, j, k + 1) - c) * (at(f, i, j, k + 1) - c);
        }
    return h * s;
  };
  // The modulus u is a cone at the axis, so differencing it directly is only
  // first order there. Difference the smooth field u e^{i l theta} instead and
  // remove the angular part pointwise.
  std::vector<double> re(u3.size()), im(u3.size());
  double mass = 0, vort = 0, elec = 0, phi2 = 0, a2 = 0, pot = 0, div2 = 0, angular = 0;
  const double phi_cap = p.q > 0 ? p.omega / p.q : 0.0;
  double slack = 0.0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t a = g3.index(i, j, k);
        const double x = g3.coord(i), y = g3.coord(j), rho2 = x * x + y * y;
        const double uu = u3[a] * u3[a];
        const double th = p.ell * std::atan2(y, x);
        re[a] = u3[a] * std::cos(th);
        im[a] = u3[a] * std::sin(th);
        angular += p.ell * p.ell * uu / rho2;
        const double v1 = -p.ell * y / rho2 - p.q * A.A1[a];
        const double v2 = p.ell * x / rho2 - p.q * A.A2[a];
        mass += uu;
        vort += (v1 * v1 + v2 * v2) * uu;
        elec += (p.omega - p.q * phi3[a]) * (p.omega - p.q * phi3[a]) * uu;
        phi2 += phi3[a] * phi3[a];
        a2 += A.A1[a] * A.A1[a] + A.A2[a] * A.A2[a];
        pot += pr.nl.F(u3[a]);
        const double d = (at(A.A1, i + 1, j, k) - at(A.A1, i - 1, j, k) + at(A.A2, i, j + 1, k) -
                          at(A.A2, i, j - 1, k)) /
                         (2 * h);
        div2 += d * d;
        if (p.q > 0) slack = std::max({slack, -phi3[a] / phi_cap, phi3[a] / phi_cap - 1.0});
      }
  rep.phi_bound_slack = slack;
  rep.cart[0] = 0.5 * (dirichlet(re) + dirichlet(im) - angular * dv);
  rep.cart[1] = 0.5 * p.m * p.m * mass * dv;
  rep.cart[2] = 0.5 * vort * dv;
  rep.cart[3] = -0.5 * elec * dv;
  rep.cart[4] = -0.5 * (dirichlet(phi3) + p.mu * p.mu * phi2 * dv);
  rep.cart[5] = 0.5 * (dirichlet(A.A1) + dirichlet(A.A2) - div2 * dv + p.mu * p.mu * a2 * dv);
  rep.cart[6] = -pot * dv;
  rep.l2_cyl = rs.u2;
  rep.l2_cart = mass * dv;
  for (std::size_t t = 0; t < rep.cyl.size(); ++t) {
    rep.rel_err[t] = term_gap(rep.cyl[t], rep.cart[t]);
    rep.max_rel_err = std::max(rep.max_rel_err, rep.rel_err[t]);
  }
  return rep;
}

}  // namespace kgm
