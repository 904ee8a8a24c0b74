#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgm/errors.hpp"
#include "kgm/meshgrid.hpp"

namespace kgm {

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
  std::string method = "pcg-jacobi";
};

struct LinearSolveOptions {
  double tol = 1e-10;
  int max_iter = 0;  // 0 -> 10 * dimension
};

class LinearSolveError : public ConvergenceError {
 public:
  LinearSolveError(const std::string& what, SolveStats s) : ConvergenceError(what), stats(std::move(s)) {}
  SolveStats stats;
};

namespace detail {
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}
}  // namespace detail

/// Jacobi-preconditioned conjugate gradients. `x` holds the initial guess on
/// entry and the solution on exit. Stops on the true residual
/// ||b - A x|| <= tol ||b||.
inline SolveStats spd_solve_into(const SparseOperator& A, std::span<const double> b, std::span<double> x,
                                 LinearSolveOptions opts = {}) {
  const std::size_t n = A.dimension();
  if (b.size() != n || x.size() != n) throw ConfigError("spd_solve: dimension mismatch");
  if (!(opts.tol > 0.0 && opts.tol < 1.0)) throw ConfigError("spd_solve: tol must lie in (0,1)");
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : static_cast<int>(10 * n);

  SolveStats st;
  const double bnorm = std::sqrt(detail::dot(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return st;
  }

  std::vector<double> inv_diag(n), r(n), z(n), p(n), Ap(n);
  for (std::size_t k = 0; k < n; ++k) inv_diag[k] = 1.0 / A.diagonal(k);

  auto residual = [&] {
    A.apply(x, Ap);
    for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - Ap[k];
    return std::sqrt(detail::dot(r, r));
  };

  double rnorm = residual();
  st.relative_residual = rnorm / bnorm;
  if (st.relative_residual <= opts.tol) return st;

  for (std::size_t k = 0; k < n; ++k) z[k] = inv_diag[k] * r[k];
  p = z;
  double rz = detail::dot(r, z);

  // The recursive residual drifts from the true one at the 1e-13 level, so
  // confirm against the true residual and restart when they disagree.
  while (st.iterations < max_iter) {
    A.apply(p, Ap);
    const double pAp = detail::dot(p, Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rz / pAp;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * Ap[k];
    }
    ++st.iterations;
    rnorm = std::sqrt(detail::dot(r, r));
    if (rnorm <= opts.tol * bnorm) {
      rnorm = residual();
      st.relative_residual = rnorm / bnorm;
      if (st.relative_residual <= opts.tol) return st;
      for (std::size_t k = 0; k < n; ++k) z[k] = inv_diag[k] * r[k];
      p = z;
      rz = detail::dot(r, z);
      continue;
    }
    for (std::size_t k = 0; k < n; ++k) z[k] = inv_diag[k] * r[k];
    const double rz_new = detail::dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
  }
  st.relative_residual = residual() / bnorm;
  if (st.relative_residual <= opts.tol) return st;
  throw LinearSolveError("conjugate gradients did not converge (relative residual " +
                             std::to_string(st.relative_residual) + " after " +
                             std::to_string(st.iterations) + " iterations)",
                         st);
}

inline std::pair<std::vector<double>, SolveStats> spd_solve(const SparseOperator& A, std::span<const double> b,
                                                            double tol = 1e-10, int max_iter = 0) {
  std::vector<double> x(A.dimension(), 0.0);
  auto st = spd_solve_into(A, b, x, {tol, max_iter});
  return {std::move(x), st};
}

/// Dense Cholesky solve, for small systems only.
inline std::pair<std::vector<double>, SolveStats> spd_solve_direct(const SparseOperator& A,
                                                                   std::span<const double> b) {
  const std::size_t n = A.dimension();
  if (n > 4096) throw ConfigError("spd_solve_direct: system too large for dense factorization");
  std::vector<double> Lm(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t p = A.row_ptr()[r]; p < A.row_ptr()[r + 1]; ++p) Lm[r * n + A.cols()[p]] = A.values()[p];
  for (std::size_t j = 0; j < n; ++j) {
    double d = Lm[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= Lm[j * n + k] * Lm[j * n + k];
    if (!(d > 0.0)) throw LinearSolveError("matrix is not positive definite", {0, 1.0, "cholesky"});
    d = std::sqrt(d);
    Lm[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = Lm[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= Lm[i * n + k] * Lm[j * n + k];
      Lm[i * n + j] = s / d;
    }
  }
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= Lm[i * n + k] * x[k];
    x[i] /= Lm[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) x[i] -= Lm[k * n + i] * x[k];
    x[i] /= Lm[i * n + i];
  }
  SolveStats st{1, 0.0, "cholesky"};
  const auto Ax = A.apply(x);
  double rr = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    rr += (Ax[k] - b[k]) * (Ax[k] - b[k]);
    bb += b[k] * b[k];
  }
  st.relative_residual = bb > 0.0 ? std::sqrt(rr / bb) : 0.0;
  return {std::move(x), st};
}

}  // namespace kgm
