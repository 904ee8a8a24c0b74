#include <gtest/gtest.h>

#include <cmath>

#include "kgm/verify.hpp"

using namespace kgm;

namespace {

Problem problem(int nr = 12, double R = 8.0) {
  return make_problem(build_grid(nr, 2 * nr, R, R), PhysParams{}, Nonlinearity::pure_power(3.0));
}

}  // namespace

TEST(Probes, SeededAndSmooth) {
  const CylGrid g(12, 24, 8.0, 8.0);
  const auto a = random_probes(g, 1, 4, 3);
  const auto b = random_probes(g, 1, 4, 3);
  const auto c = random_probes(g, 1, 4, 4);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (const auto& p : a) EXPECT_FALSE(detail::all_zero(p));
}

TEST(Suite, ProbeChecksPass) {
  const auto pr = problem();
  const auto res = run_suite(pr, random_probes(pr.grid, 1, 5, 11));
  EXPECT_EQ(res.size(), 5u * 12u);
  EXPECT_TRUE(all_pass(res));
  int identities = 0, inequalities = 0, reports = 0;
  for (const auto& r : res) {
    if (r.kind == CheckKind::Identity) ++identities;
    if (r.kind == CheckKind::Inequality) ++inequalities;
    if (r.kind == CheckKind::Report) ++reports;
    if (r.kind == CheckKind::Identity) {
      EXPECT_LE(r.measured, 1e-8) << r.name;
    }
  }
  EXPECT_EQ(identities, 30);
  EXPECT_EQ(inequalities, 25);
  EXPECT_EQ(reports, 5);
  EXPECT_EQ(kind_name(CheckKind::Report), "report");
}

TEST(Suite, ZeroProbeIsSkipped) {
  const auto pr = problem();
  const auto res = probe_checks(pr, pr.grid.zeros(), "z");
  ASSERT_FALSE(res.empty());
  for (const auto& r : res) EXPECT_TRUE(r.skipped);
  EXPECT_TRUE(all_pass(res));
}

TEST(Suite, FailuresAreDetected) {
  auto r = detail::le_check("x", "ref", CheckKind::Inequality, 2.0, 1.0);
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(all_pass({r}));
  // a tightened tolerance makes identity checks fail
  const auto pr = problem();
  SuiteOptions o;
  o.identity_tol = 0.0;
  bool any_fail = false;
  for (const auto& x : probe_checks(pr, random_probes(pr.grid, 1, 1, 2)[0], "p", o))
    if (x.kind == CheckKind::Identity && !x.pass) any_fail = true;
  EXPECT_TRUE(any_fail);
}

TEST(Suite, GroundStateCertificates) {
  const auto pr = problem();
  const auto gs = solve_ground_state(pr, SolveOptions{});
  ASSERT_TRUE(gs.converged);
  const auto res = state_checks(pr, gs, "s");
  for (const auto& r : res) EXPECT_TRUE(r.pass) << r.name << " " << r.measured;
  auto find = [&](const std::string& n) {
    for (const auto& r : res)
      if (r.name == "s:" + n) return r;
    ADD_FAILURE() << n;
    return InvariantResult{};
  };
  EXPECT_LT(find("nsecond_negative").measured, 0.0);
  EXPECT_GT(find("lp_norm").measured, 0.0);
  EXPECT_EQ(find("lp_norm").kind, CheckKind::Report);
}

TEST(Refinement, SlackDoesNotGrow) {
  const auto pr = problem(16, 6.0);
  const auto s = slack_refinement(pr, [](double r, double z) { return 5.0 * r * std::exp(-(r * r + z * z) / 2.0); });
  EXPECT_LE(s.coarse_max(), 1e-6);
  EXPECT_LE(s.fine_max(), std::max(s.coarse_max(), 1e-12));
}
