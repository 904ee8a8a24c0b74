#pragma once

// Cell-centered tensor grid on the half-plane (r, z) in (0,R) x (-L,L), the
// two axisymmetric quadratures (r dr dz and dr dz / r), and the symmetric
// five-point operators used by every solve.
//
// All operators are assembled face by face in weak form: each interior face
// contributes w (x_a - x_b)^2 to the quadratic form and each Dirichlet
// boundary face w x_a^2, so the matrices are symmetric by construction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <tuple>
#include <vector>

#include "kgm/errors.hpp"
#include "kgm/model.hpp"

namespace kgm {

/// Nodal samples on a CylGrid, index k = j * Nr + i (radial index fastest).
using ScalarField = std::vector<double>;

class CylGrid {
 public:
  CylGrid() = default;
  CylGrid(int nr, int nz, double radius, double half_length)
      : nr_(nr), nz_(nz), R_(radius), L_(half_length) {
    if (nr < 4 || nz < 4) throw ConfigError("grid needs at least 4 cells per direction");
    if (!(radius > 0.0) || !(half_length > 0.0) || !std::isfinite(radius) || !std::isfinite(half_length))
      throw ConfigError("grid extents must be positive and finite");
    dr_ = R_ / nr_;
    dz_ = 2.0 * L_ / nz_;
    r_.resize(nr_);
    z_.resize(nz_);
    for (int i = 0; i < nr_; ++i) r_[i] = (i + 0.5) * dr_;
    for (int j = 0; j < nz_; ++j) z_[j] = -L_ + (j + 0.5) * dz_;
  }

  int nr() const { return nr_; }
  int nz() const { return nz_; }
  double R() const { return R_; }
  double L() const { return L_; }
  double dr() const { return dr_; }
  double dz() const { return dz_; }
  std::size_t size() const { return static_cast<std::size_t>(nr_) * nz_; }
  const std::vector<double>& r_coords() const { return r_; }
  const std::vector<double>& z_coords() const { return z_; }

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nr_ + i; }
  double r(int i) const { return r_[i]; }
  double z(int j) const { return z_[j]; }

  double w_cyl(int i) const { return 2.0 * std::numbers::pi * r_[i] * dr_ * dz_; }
  double w_inv(int i) const { return 2.0 * std::numbers::pi * dr_ * dz_ / r_[i]; }

  ScalarField zeros() const { return ScalarField(size(), 0.0); }

  template <class Fn>
  ScalarField sample(Fn&& fn) const {
    ScalarField out(size());
    for (int j = 0; j < nz_; ++j)
      for (int i = 0; i < nr_; ++i) out[index(i, j)] = fn(r_[i], z_[j]);
    return out;
  }

  bool operator==(const CylGrid& o) const {
    return nr_ == o.nr_ && nz_ == o.nz_ && R_ == o.R_ && L_ == o.L_;
  }

 private:
  int nr_ = 0, nz_ = 0;
  double R_ = 0.0, L_ = 0.0, dr_ = 0.0, dz_ = 0.0;
  std::vector<double> r_, z_;
};

inline CylGrid build_grid(int nr, int nz, double R, double L) { return CylGrid(nr, nz, R, L); }

inline void check_size(const CylGrid& g, std::span<const double> f) {
  if (f.size() != g.size()) throw ConfigError("field dimension does not match grid");
}

inline double integrate_cyl(const CylGrid& g, std::span<const double> field) {
  check_size(g, field);
  double s = 0.0;
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) s += field[g.index(i, j)] * g.w_cyl(i);
  return s;
}

inline double integrate_inv_r(const CylGrid& g, std::span<const double> field) {
  check_size(g, field);
  double s = 0.0;
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) s += field[g.index(i, j)] * g.w_inv(i);
  return s;
}

/// Weighted sum of a nodewise product: sum_k a_k b_k c_k w_k, w = w_cyl or w_inv.
enum class Measure { Cyl, InvR };

inline double weight(const CylGrid& g, Measure m, int i) {
  return m == Measure::Cyl ? g.w_cyl(i) : g.w_inv(i);
}

template <class Fn>
double integrate_nodes(const CylGrid& g, Measure m, Fn&& fn) {
  double s = 0.0;
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) {
      const std::size_t k = g.index(i, j);
      s += fn(k) * weight(g, m, i);
    }
  return s;
}

/// Row-compressed symmetric matrix.
class SparseOperator {
 public:
  SparseOperator() = default;

  /// Builds from (row, col, value) triplets; duplicates are summed.
  SparseOperator(std::size_t n, std::vector<std::tuple<std::size_t, std::size_t, double>> triplets)
      : n_(n) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    row_ptr_.assign(n + 1, 0);
    for (std::size_t t = 0; t < triplets.size();) {
      const auto [r, c, v0] = triplets[t];
      double v = v0;
      std::size_t u = t + 1;
      while (u < triplets.size() && std::get<0>(triplets[u]) == r && std::get<1>(triplets[u]) == c)
        v += std::get<2>(triplets[u++]);
      cols_.push_back(c);
      vals_.push_back(v);
      ++row_ptr_[r + 1];
      t = u;
    }
    for (std::size_t r = 0; r < n; ++r) row_ptr_[r + 1] += row_ptr_[r];
    symmetric_ = check_symmetry(1e-14);
    spd_ = symmetric_;
    for (std::size_t r = 0; r < n && spd_; ++r) spd_ = diagonal(r) > 0.0;
  }

  std::size_t dimension() const { return n_; }
  bool symmetric() const { return symmetric_; }
  /// Symmetric with strictly positive diagonal. Definiteness itself is
  /// guaranteed by the assembly (sums of squares plus a positive mass).
  bool spd() const { return spd_; }

  void apply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < n_; ++r) {
      double s = 0.0;
      for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) s += vals_[p] * x[cols_[p]];
      y[r] = s;
    }
  }
  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(n_);
    apply(x, y);
    return y;
  }
  double quadratic_form(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t r = 0; r < n_; ++r) {
      double t = 0.0;
      for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) t += vals_[p] * x[cols_[p]];
      s += x[r] * t;
    }
    return s;
  }
  double diagonal(std::size_t r) const {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
      if (cols_[p] == r) return vals_[p];
    return 0.0;
  }
  double entry(std::size_t r, std::size_t c) const {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
      if (cols_[p] == c) return vals_[p];
    return 0.0;
  }
  double row_sum(std::size_t r) const {
    double s = 0.0;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) s += vals_[p];
    return s;
  }
  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& cols() const { return cols_; }
  const std::vector<double>& values() const { return vals_; }

  /// Copy with `d` added to the diagonal (every row of an assembled operator
  /// stores its diagonal entry).
  SparseOperator with_diagonal_added(std::span<const double> d) const {
    SparseOperator out = *this;
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
        if (cols_[p] == r) out.vals_[p] += d[r];
    out.spd_ = out.symmetric_;
    for (std::size_t r = 0; r < n_ && out.spd_; ++r) out.spd_ = out.diagonal(r) > 0.0;
    return out;
  }

 private:
  bool check_symmetry(double rel) const {
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
        const double a = vals_[p], b = entry(cols_[p], r);
        if (std::abs(a - b) > rel * std::max(std::abs(a), std::abs(b))) return false;
      }
    return true;
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_, cols_;
  std::vector<double> vals_;
  bool symmetric_ = false, spd_ = false;
};

namespace detail {

using Triplets = std::vector<std::tuple<std::size_t, std::size_t, double>>;

inline void add_face(Triplets& t, std::size_t a, std::size_t b, double w) {
  t.emplace_back(a, a, w);
  t.emplace_back(b, b, w);
  t.emplace_back(a, b, -w);
  t.emplace_back(b, a, -w);
}

/// Gradient form for the measure r dr dz: 2 pi \int (f_r^2 + f_z^2) r dr dz.
/// Dirichlet on r = R and z = +-L; the axis face has zero area.
inline Triplets r_weighted_gradient(const CylGrid& g) {
  Triplets t;
  const double tau = 2.0 * std::numbers::pi;
  const double dr = g.dr(), dz = g.dz();
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) {
      const std::size_t k = g.index(i, j);
      t.emplace_back(k, k, 0.0);  // every row carries its diagonal
      if (i + 1 < g.nr())
        add_face(t, k, g.index(i + 1, j), tau * (i + 1) * dr * dz / dr);
      else
        t.emplace_back(k, k, tau * g.R() * dz / (0.5 * dr));
      if (j + 1 < g.nz()) add_face(t, k, g.index(i, j + 1), tau * g.r(i) * dr / dz);
      if (j == 0 || j + 1 == g.nz()) t.emplace_back(k, k, tau * g.r(i) * dr / (0.5 * dz));
    }
  return t;
}

/// Gradient form for the measure dr dz / r: 2 pi \int (a_r^2 + a_z^2) / r dr dz,
/// Dirichlet everywhere. The axis face assumes the regular profile a ~ r^2
/// between r = 0 and the first node, for which
/// \int_0^{r0} a_r^2 / r dr = 2 a_0^2 / r0^2. The midpoint face weights are
/// exact for that profile as well.
inline Triplets inv_r_weighted_gradient(const CylGrid& g) {
  Triplets t;
  const double tau = 2.0 * std::numbers::pi;
  const double dr = g.dr(), dz = g.dz();
  const double r0 = g.r(0);
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) {
      const std::size_t k = g.index(i, j);
      t.emplace_back(k, k, 0.0);
      if (i == 0) t.emplace_back(k, k, tau * dz * 2.0 / (r0 * r0));
      if (i + 1 < g.nr())
        add_face(t, k, g.index(i + 1, j), tau * dz / (dr * ((i + 1) * dr)));
      else
        t.emplace_back(k, k, tau * dz / (0.5 * dr * g.R()));
      if (j + 1 < g.nz()) add_face(t, k, g.index(i, j + 1), tau * (dr / g.r(i)) / dz);
      if (j == 0 || j + 1 == g.nz()) t.emplace_back(k, k, tau * (dr / g.r(i)) / (0.5 * dz));
    }
  return t;
}

inline void add_mass(const CylGrid& g, Triplets& t, Measure meas, std::span<const double> coeff) {
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) {
      const std::size_t k = g.index(i, j);
      t.emplace_back(k, k, coeff[k] * weight(g, meas, i));
    }
}

}  // namespace detail

/// -(1/r) d_r(r d_r) - d_z^2 with Dirichlet outer boundaries, no mass.
inline SparseOperator assemble_laplacian(const CylGrid& g) {
  return SparseOperator(g.size(), detail::r_weighted_gradient(g));
}

/// Curl energy form of A = a grad(theta), no mass.
inline SparseOperator assemble_gauge_curl(const CylGrid& g) {
  return SparseOperator(g.size(), detail::inv_r_weighted_gradient(g));
}

/// Riesz map of the vortex norm ||grad u||^2 + (m^2 - w^2)||u||^2 + ell^2 \int u^2/r^2.
inline SparseOperator assemble_h1_operator(const CylGrid& g, const PhysParams& p) {
  if (!(p.mass_gap() > 0.0)) throw ConfigError("h1 operator needs m^2 > omega^2");
  auto t = detail::r_weighted_gradient(g);
  const double l2 = static_cast<double>(p.ell) * p.ell;
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) {
      const std::size_t k = g.index(i, j);
      t.emplace_back(k, k, p.mass_gap() * g.w_cyl(i) + l2 * g.w_inv(i));
    }
  return SparseOperator(g.size(), std::move(t));
}

/// (-Laplacian + mu^2 + q^2 u^2) with r dr dz weights.
inline SparseOperator assemble_phi_operator(const CylGrid& g, const PhysParams& p, std::span<const double> u) {
  check_size(g, u);
  auto t = detail::r_weighted_gradient(g);
  std::vector<double> c(g.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = p.mu * p.mu + p.q * p.q * u[k] * u[k];
  detail::add_mass(g, t, Measure::Cyl, c);
  return SparseOperator(g.size(), std::move(t));
}

/// Scalar gauge operator: form 2 pi \int [|grad a|^2 + (mu^2 + q^2 u^2) a^2] / r dr dz.
inline SparseOperator assemble_gauge_operator(const CylGrid& g, const PhysParams& p, std::span<const double> u) {
  check_size(g, u);
  auto t = detail::inv_r_weighted_gradient(g);
  std::vector<double> c(g.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = p.mu * p.mu + p.q * p.q * u[k] * u[k];
  detail::add_mass(g, t, Measure::InvR, c);
  return SparseOperator(g.size(), std::move(t));
}

/// Diagonal (mu^2 + q^2 u^2) w for the given measure; added to the cached
/// base operators to get the u-dependent ones without reassembly.
inline std::vector<double> coupling_mass(const CylGrid& g, const PhysParams& p, std::span<const double> u,
                                         Measure meas) {
  std::vector<double> d(g.size());
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) {
      const std::size_t k = g.index(i, j);
      d[k] = (p.mu * p.mu + p.q * p.q * u[k] * u[k]) * weight(g, meas, i);
    }
  return d;
}

}  // namespace kgm
