#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "screwcert/scenario.hpp"
#include "screwcert/world.hpp"

using namespace screwcert;

TEST(Scenario, ParsesKeysAndComments) {
  const Scenario s = Scenario::parse(R"(# comment
name = "demo"
map = "lturn"
robot.shape = "ellipse"
robot.params = [0.3, 0.15]   # a, b
cost.q_r = 0.2
nav.stall_steps = 7
seed = 42
)");
  EXPECT_EQ(s.name, "demo");
  EXPECT_EQ(s.map, "lturn");
  EXPECT_EQ(s.shape, "ellipse");
  EXPECT_EQ(s.shape_params, (std::vector<double>{0.3, 0.15}));
  EXPECT_EQ(s.q_r, std::vector<double>(9, 0.2));
  EXPECT_EQ(s.stall_steps, 7);
  EXPECT_EQ(s.seed, 42u);
}

TEST(Scenario, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(Scenario::parse("robot.colour = \"red\"\n"), ConfigError);
  EXPECT_THROW(Scenario::parse("map = \"maze\"\n"), ConfigError);
  EXPECT_THROW(Scenario::parse("control.v_limit = fast\n"), ConfigError);
  EXPECT_THROW(Scenario::parse("start = [1, 2]\n"), ConfigError);
  EXPECT_THROW(Scenario::parse("seed = -3\n"), ConfigError);
  EXPECT_THROW(Scenario::parse("nav.stall_steps = 0\n").validate(), ConfigError);
  EXPECT_THROW(Scenario::parse("relax.ell = 2\n").validate(), ConfigError);
  EXPECT_THROW(Scenario::load("/nonexistent/scenario.toml"), ConfigError);
}

TEST(Scenario, SetOverridesAfterLoad) {
  Scenario s = Scenario::parse("name = \"x\"\n");
  s.set("relax.ell", "4");
  s.set("goal", "[3, 1]");
  EXPECT_EQ(s.relax_ell, 4);
  EXPECT_TRUE(s.goal_set);
  EXPECT_EQ(s.goal, Eigen::Vector2d(3, 1));
  EXPECT_THROW(s.set("relax.ell", "4.5"), ConfigError);
}

TEST(Scenario, EveryKeyIsListedOnce) {
  const auto keys = Scenario::keys();
  std::set<std::string> uniq(keys.begin(), keys.end());
  EXPECT_EQ(uniq.size(), keys.size());
  EXPECT_TRUE(uniq.count("nav.stall_steps"));
}

TEST(Scenario, ShippedScenariosLoadAndBuild) {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(SCREWCERT_SCENARIO_DIR)) {
    if (e.path().extension() != ".toml") continue;
    const Scenario s = Scenario::load(e.path());
    const SemialgebraicSet A = shape_library(s.shape, s.shape_params);
    const World w = build_world(s, A);
    EXPECT_FALSE(w.grid.occupied_at(w.start.head<2>())) << e.path();
    EXPECT_FALSE(w.grid.occupied_at(w.goal)) << e.path();
    ++n;
  }
  EXPECT_GE(n, 6);
}

TEST(World, ForestNarrowestGapIsTheMinimum) {
  Scenario s = Scenario::load(std::filesystem::path(SCREWCERT_SCENARIO_DIR) / "forest.toml");
  const SemialgebraicSet A = shape_library(s.shape, s.shape_params);
  for (uint64_t seed : {1, 2, 3, 17}) {
    s.seed = seed;
    const World w = build_world(s, A);
    ASSERT_GE(w.discs.size(), 2u);
    // Recomputed from the discs; every pair respects the minimum.
    double gap = std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < w.discs.size(); ++a) {
      for (size_t b = a + 1; b < w.discs.size(); ++b) {
        gap = std::min(gap, (w.discs[a].center - w.discs[b].center).norm() - w.discs[a].radius - w.discs[b].radius);
      }
    }
    EXPECT_NEAR(gap, w.narrowest_gap, 1e-12);
    EXPECT_NEAR(gap, s.forest_min_gap, 1e-9) << seed;
  }
}

TEST(World, ForestIsDeterministicPerSeed) {
  Scenario s = Scenario::load(std::filesystem::path(SCREWCERT_SCENARIO_DIR) / "forest.toml");
  const SemialgebraicSet A = shape_library(s.shape, s.shape_params);
  s.seed = 5;
  EXPECT_EQ(build_world(s, A).grid.to_text(), build_world(s, A).grid.to_text());
  Scenario t = s;
  t.seed = 6;
  EXPECT_NE(build_world(s, A).grid.to_text(), build_world(t, A).grid.to_text());
}
