#include <gtest/gtest.h>

#include <filesystem>

#include "kgm/io.hpp"

using namespace kgm;

TEST(ConfigText, ParsesCommentsAndWhitespace) {
  const auto kv = parse_config_text("# header\n grid.nr = 24  \n\nphys.q=0.25 # inline\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("grid.nr"), "24");
  EXPECT_EQ(kv.at("phys.q"), "0.25");
  EXPECT_THROW(parse_config_text("grid.nr 24\n"), ConfigError);
}

TEST(Config, Defaults) {
  const auto c = build_config({});
  EXPECT_EQ(c.grid.nr(), 40);
  EXPECT_EQ(c.grid.nz(), 80);
  EXPECT_EQ(c.phys.omega, 0.5);
  EXPECT_EQ(c.nl.terms().size(), 1u);
  EXPECT_EQ(c.nl.sigma(), 3.0);
  EXPECT_EQ(c.route, "auto");
  EXPECT_EQ(c.schedule, default_mu_schedule());
  EXPECT_EQ(c.oracle_n, (std::vector<int>{17, 33}));
  EXPECT_EQ(c.raw.size(), config_defaults().size());
}

TEST(Config, Overrides) {
  const auto c = load_config("", {"nl.terms=1:3, 0.5:4.5", "sweep.schedule=1,0.5,0", "solve.route=theorem2",
                                  "phys.ell=-2", "solve.recentre=false"});
  ASSERT_EQ(c.nl.terms().size(), 2u);
  EXPECT_EQ(c.nl.terms()[1].coeff, 0.5);
  EXPECT_EQ(c.nl.terms()[1].exponent, 4.5);
  EXPECT_EQ(c.schedule, (std::vector<double>{1.0, 0.5, 0.0}));
  EXPECT_EQ(c.route, "theorem2");
  EXPECT_EQ(c.phys.ell, -2);
  EXPECT_FALSE(c.solve.recentre);
}

TEST(Config, Rejections) {
  EXPECT_THROW(build_config({{"grid.nx", "4"}}), ConfigError);
  EXPECT_THROW(build_config({{"grid.nr", "ten"}}), ConfigError);
  EXPECT_THROW(build_config({{"grid.nr", "2"}}), ConfigError);
  EXPECT_THROW(build_config({{"nl.terms", "3"}}), ConfigError);
  EXPECT_THROW(build_config({{"nl.terms", "1:7"}}), ConfigError);
  EXPECT_THROW(build_config({{"solve.route", "fastest"}}), ConfigError);
  EXPECT_THROW(build_config({{"solve.recentre", "maybe"}}), ConfigError);
  EXPECT_THROW(build_config({{"sweep.schedule", "0,1"}}), ConfigError);
  EXPECT_THROW(build_config({{"verify.oracle_n", "16"}}), ConfigError);
  EXPECT_THROW(build_config({{"verify.oracle_n", "17,9"}}), ConfigError);
  EXPECT_THROW(build_config({{"fiber.tmin", "2"}, {"fiber.tmax", "1"}}), ConfigError);
  EXPECT_THROW(load_config("", {"phys.q"}), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/kgm.cfg", {}), ConfigError);
  try {
    build_config({{"phys.omega", "1.2"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("0<omega^2<m^2"), std::string::npos);
  }
}

TEST(Fields, RoundTripIsBitExact) {
  const CylGrid g(5, 7, 1.25, 2.0);
  auto f = g.sample([](double r, double z) { return std::exp(r) * std::sin(3 * z) / 3.0; });
  f[3] = 1e-300;
  f[4] = -0.0;
  const auto [g2, f2] = parse_field(format_field(g, f));
  EXPECT_TRUE(g2 == g);
  ASSERT_EQ(f2.size(), f.size());
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_EQ(f2[k], f[k]);
  EXPECT_EQ(format_field(g2, f2), format_field(g, f));
}

TEST(Fields, RejectsMalformed) {
  EXPECT_THROW(parse_field("XFIELD\n"), ConfigError);
  EXPECT_THROW(parse_field("CYLFIELD v1\n4 4\n"), ConfigError);
  EXPECT_THROW(parse_field("CYLFIELD v1\n4 4 1 1\n1 2 3\n"), ConfigError);
  const CylGrid g(4, 4, 1.0, 1.0);
  EXPECT_THROW(format_field(g, ScalarField(3)), ConfigError);
}

TEST(Fields, SvgHasOneRectPerCell) {
  const CylGrid g(6, 8, 1.0, 1.0);
  const auto svg = field_svg(g, g.sample([](double r, double) { return r; }), "u");
  std::size_t n = 0;
  for (auto p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++n;
  EXPECT_EQ(n, g.size());
  EXPECT_EQ(svg.rfind("</svg>"), svg.size() - 7);
}

TEST(Summary, KeysAndDeterminism) {
  const auto c = load_config("", {"grid.nr=12", "grid.nz=24", "grid.R=8", "grid.L=8"});
  const auto pr = make_problem(c.grid, c.phys, c.nl, c.lin);
  const auto gs = solve_ground_state(pr, c.solve);
  const auto j = ground_state_summary(c, pr, gs, std::nullopt);
  for (const char* k : {"config", "params", "grid", "route", "converged", "iterations", "energy_breakdown", "nehari",
                        "residuals", "history", "timings"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_FALSE(j["timings"].contains("wall_seconds"));
  EXPECT_EQ(j["energy_breakdown"]["total"].get<double>(), gs.energy.total);
  const auto pr2 = make_problem(c.grid, c.phys, c.nl, c.lin);
  const auto j2 = ground_state_summary(c, pr2, solve_ground_state(pr2, c.solve), std::nullopt);
  EXPECT_EQ(j.dump(2), j2.dump(2));
  EXPECT_TRUE(ground_state_summary(c, pr, gs, 1.5)["timings"].contains("wall_seconds"));
}

TEST(Summary, NumbersSurviveJson) {
  const double x = 0.1 + 0.2;
  Json j = {{"x", x}};
  EXPECT_EQ(Json::parse(j.dump())["x"].get<double>(), x);
  EXPECT_EQ(detail::format_double(x), "0.30000000000000004");
}
