#include <gtest/gtest.h>

#include <cmath>

#include "kgm/optimizer.hpp"

using namespace kgm;

namespace {

Problem problem(double p, PhysParams ph = {}, int nr = 16, double R = 8.0) {
  return make_problem(build_grid(nr, 2 * nr, R, R), ph, Nonlinearity::pure_power(p));
}

double l2(const CylGrid& g, std::span<const double> u) {
  double s = 0.0;
  for (int j = 0; j < g.nz(); ++j)
    for (int i = 0; i < g.nr(); ++i) s += u[g.index(i, j)] * u[g.index(i, j)] * g.w_cyl(i);
  return std::sqrt(s);
}

}  // namespace

TEST(Seed, NormalisedAndVanishingOnAxis) {
  const CylGrid g(20, 40, 6.0, 6.0);
  for (int ell : {1, 2, -3}) {
    const auto u = make_seed(g, ell);
    EXPECT_NEAR(l2(g, u), 1.0, 1e-13);
    // r^|l| behaviour in the first cell column
    EXPECT_LT(std::abs(u[g.index(0, 20)]), std::abs(u[g.index(3, 20)]));
  }
}

TEST(Seed, PerturbationIsSeeded) {
  const CylGrid g(12, 24, 6.0, 6.0);
  SeedProfile a{1.0, 0.0, 0.3, 5}, b = a, c = a;
  c.seed = 6;
  EXPECT_EQ(make_seed(g, 1, a), make_seed(g, 1, b));
  EXPECT_NE(make_seed(g, 1, a), make_seed(g, 1, c));
  Uniform01 r1(9), r2(9);
  for (int k = 0; k < 100; ++k) {
    const double x = r1();
    EXPECT_EQ(x, r2());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(Recentre, MovesCentroidToOrigin) {
  const CylGrid g(10, 60, 4.0, 6.0);
  SeedProfile s;
  s.z_shift = 1.7;
  const auto u = make_seed(g, 1, s);
  EXPECT_NEAR(axial_centroid(g, u), 1.7, 1e-3);
  const auto rc = recentre(g, u);
  EXPECT_NEAR(rc.shift, -rc.centroid_before, 0.0);
  EXPECT_LE(std::abs(rc.centroid_after), 0.5 * g.dz());
  // centred fields are left alone
  const auto again = recentre(g, make_seed(g, 1));
  EXPECT_EQ(again.shift, 0.0);
  EXPECT_EQ(again.u, make_seed(g, 1));
  EXPECT_THROW(recentre(g, g.zeros()), ConfigError);
  // whole-cell periodic shifts are exact permutations
  const auto w = shift_axial(g, shift_axial(g, u, 3 * g.dz()), -3 * g.dz());
  for (std::size_t k = 0; k < u.size(); ++k) EXPECT_NEAR(w[k], u[k], 1e-15);
}

TEST(NehariProjection, DecoupledClosedForm) {
  PhysParams ph;
  ph.q = 0.0;
  for (double p : {3.0, 4.0, 5.0}) {
    const auto pr = problem(p, ph, 12);
    const auto u = make_seed(pr.grid, 1);
    const double Q = norm_sq_h1(pr, u);
    double P = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) P += std::pow(std::abs(u[k]), p) * pr.wc[k];
    const double t_exact = std::pow(Q / P, 1.0 / (p - 2.0));
    SolveOptions o;
    o.nehari_tol = 1e-13;
    const auto np = project_nehari(pr, u, o);
    EXPECT_NEAR(np.t, t_exact, 1e-8 * t_exact) << p;
    const double E = eval_reduced(pr, np.state).total;
    const double E_exact = (0.5 - 1.0 / p) * t_exact * t_exact * Q;
    EXPECT_NEAR(E, E_exact, 1e-8 * E_exact) << p;
    EXPECT_FALSE(np.multi_root);
  }
}

TEST(NehariProjection, CoupledLandsOnManifold) {
  const auto pr = problem(3.0);
  const auto u = make_seed(pr.grid, 1);
  const auto np = project_nehari(pr, u);
  EXPECT_LE(std::abs(nehari_value(pr, np.state)), 1e-8 * norm_sq_h1(pr, np.state.u));
  EXPECT_GT(np.t, 1.0);
  EXPECT_THROW(project_nehari(pr, pr.grid.zeros()), ConfigError);
}

TEST(Options, Validation) {
  SolveOptions o;
  EXPECT_NO_THROW(validate(o));
  o.grad_tol = 0.0;
  EXPECT_THROW(validate(o), ConfigError);
  o = {};
  o.backtrack = 1.0;
  EXPECT_THROW(validate(o), ConfigError);
  o = {};
  o.max_step = 0.5;
  EXPECT_THROW(validate(o), ConfigError);
  o = {};
  o.max_iter = -1;
  EXPECT_THROW(validate(o), ConfigError);
}

TEST(Minimize, ConvergesWithCertificates) {
  const auto pr = problem(3.0);
  const auto gs = solve_ground_state(pr, SolveOptions{});
  ASSERT_TRUE(gs.converged);
  EXPECT_EQ(gs.route, Route::NehariMinimization);
  EXPECT_LE(std::abs(gs.nehari.N), 1e-8 * gs.h1_norm_sq);
  EXPECT_LT(gs.nehari.Nsecond, 0.0);
  EXPECT_GT(gs.energy.total, 0.0);
  EXPECT_LE(gs.residuals.u, 1e-6);
  EXPECT_LE(gs.residuals.phi, 1e-6);
  EXPECT_LE(gs.residuals.a, 1e-6);
  // energies never increase beyond the accepted slack
  for (std::size_t k = 1; k < gs.history.size(); ++k)
    EXPECT_LE(gs.history[k].energy, gs.history[k - 1].energy * (1.0 + 1e-12) + 1e-12);
  // the projected seed is an upper bound
  const auto np = project_nehari(pr, make_seed(pr.grid, 1));
  EXPECT_LE(gs.energy.total, eval_reduced(pr, np.state).total);
}

TEST(Minimize, Deterministic) {
  const auto pr = problem(3.0, {}, 12);
  const auto a = solve_ground_state(pr, SolveOptions{});
  const auto b = solve_ground_state(pr, SolveOptions{});
  EXPECT_EQ(a.energy.total, b.energy.total);
  EXPECT_EQ(a.state.u, b.state.u);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Minimize, IterationBudgetIsReported) {
  const auto pr = problem(3.0, {}, 12);
  SolveOptions o;
  o.max_iter = 2;
  const auto gs = solve_ground_state(pr, o);
  EXPECT_FALSE(gs.converged);
  EXPECT_LE(gs.iterations, 2);
}

TEST(MountainPass, AgreesWithNehariRoute) {
  const auto pr = problem(4.0, {}, 20, 6.0);
  SolveOptions o;
  const auto a = solve_ground_state(pr, o);
  o.route = Route::MountainPass;
  const auto b = solve_ground_state(pr, o);
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  EXPECT_EQ(b.route, Route::MountainPass);
  EXPECT_NEAR(a.energy.total, b.energy.total, 1e-6 * a.energy.total);
  EXPECT_LE(std::abs(b.constraint_u), 1e-6);
}

TEST(Solve, RejectsNoneRoute) {
  const auto pr = problem(3.0, {}, 12);
  SolveOptions o;
  o.route = Route::None;
  EXPECT_THROW(solve_ground_state(pr, o), ConfigError);
}
