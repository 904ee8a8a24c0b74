#include <gtest/gtest.h>

#include <cmath>

#include "kgm/continuation.hpp"

using namespace kgm;

namespace {

Problem problem(int nr = 12, double R = 8.0) {
  return make_problem(build_grid(nr, 2 * nr, R, R), PhysParams{}, Nonlinearity::pure_power(3.0));
}

}  // namespace

TEST(Schedule, DefaultHalvesDownToZero) {
  const auto s = default_mu_schedule();
  ASSERT_EQ(s.size(), 12u);
  EXPECT_EQ(s.front(), 1.0);
  EXPECT_EQ(s[10], std::ldexp(1.0, -10));
  EXPECT_EQ(s.back(), 0.0);
  EXPECT_NO_THROW(validate_schedule(s));
  EXPECT_THROW(validate_schedule({}), ConfigError);
  EXPECT_THROW(validate_schedule({0.5, 0.5}), ConfigError);
  EXPECT_THROW(validate_schedule({0.5, 1.0}), ConfigError);
  EXPECT_THROW(validate_schedule({1.5, 0.0}), ConfigError);
  EXPECT_THROW(validate_schedule({0.5, -0.1}), ConfigError);
}

TEST(GaugeEnergy, ReducedAmplitudeIsTheMinimiser) {
  const auto pr = problem();
  const auto u = make_seed(pr.grid, 1);
  auto v = u;
  for (auto& x : v) x *= 30.0;
  for (double mu : {0.0, 0.3, 1.0}) {
    const auto P = with_mu(pr, mu);
    const auto a = solve_gauge(P, v);
    const double K = gauge_energy(P, v, a, mu);
    double lin = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) lin += a[k] * v[k] * v[k] * P.wi[k];
    EXPECT_NEAR(K, -0.5 * P.phys.q * P.phys.ell * lin, 1e-8 * std::abs(K));
    auto b = a;
    for (std::size_t k = 0; k < b.size(); ++k) b[k] += 1e-3 * std::sin(0.1 * k);
    EXPECT_GT(gauge_energy(P, v, b, mu), K);
  }
}

TEST(GaugeEnergy, ChainHoldsPairwise) {
  const auto pr = problem();
  auto u = make_seed(pr.grid, 1);
  for (auto& x : u) x *= 20.0;
  const auto checks = gauge_energy_monotonicity_check(pr, u, {0.0, 0.25, 0.5, 1.0});
  EXPECT_EQ(checks.size(), 6u);
  for (const auto& c : checks) {
    EXPECT_LE(c.mu, c.mu_prime);
    EXPECT_TRUE(c.pass) << c.mu << " " << c.mu_prime << " " << c.violation;
    EXPECT_LE(c.k_own, c.k_cross + 1e-12 * std::abs(c.k_own));
    EXPECT_LE(c.k_cross, c.k_other + 1e-12 * std::abs(c.k_own));
  }
  EXPECT_THROW(gauge_energy_monotonicity_check(pr, pr.grid.zeros(), {0.0, 1.0}), ConfigError);
}

TEST(Sweep, ShortScheduleWarmStarts) {
  const auto pr = problem();
  ContinuationOptions o;
  o.cold_check = true;
  const auto rep = sweep_mu(pr, {1.0, 0.5, 0.25, 0.0}, o);
  ASSERT_EQ(rep.entries.size(), 4u);
  ASSERT_EQ(rep.diffs.size(), 3u);
  EXPECT_TRUE(rep.bounded);
  EXPECT_TRUE(rep.entries.front().cold_restart);
  for (std::size_t k = 0; k < rep.entries.size(); ++k) {
    const auto& e = rep.entries[k];
    EXPECT_TRUE(e.converged);
    EXPECT_LE(e.energy, rep.energy_cap);
    EXPECT_LT(e.nsecond, 0.0);
    EXPECT_GT(e.lp_norm, 0.0);
    if (k > 0) {
      EXPECT_FALSE(e.cold_restart);
    }
  }
  EXPECT_EQ(rep.entries.back().mu, 0.0);
  EXPECT_TRUE(rep.terminal.converged);
  EXPECT_TRUE(rep.cold_checked);
  EXPECT_NEAR(rep.cold_terminal_energy, rep.entries.back().energy, 1e-6 * rep.cold_terminal_energy);
}

TEST(Sweep, RejectsBadSchedule) {
  const auto pr = problem();
  EXPECT_THROW(sweep_mu(pr, {0.0, 1.0}), ConfigError);
}
