#include <random>

#include <gtest/gtest.h>

#include "screwcert/planning.hpp"

using namespace screwcert;

namespace {

OccupancyGrid random_grid(std::mt19937_64& rng, int w, int h, double density) {
  OccupancyGrid g(0.1, w, h, Eigen::Vector2d::Zero());
  std::bernoulli_distribution occ(density);
  for (int i = 0; i < w; ++i)
    for (int j = 0; j < h; ++j) g.set(i, j, occ(rng));
  return g;
}

void expect_valid_path(const OccupancyGrid& g, const GridPath& p, Cell s, Cell t) {
  ASSERT_FALSE(p.cells.empty());
  EXPECT_EQ(p.cells.front(), s);
  EXPECT_EQ(p.cells.back(), t);
  double len = 0.0;
  for (size_t k = 0; k < p.cells.size(); ++k) {
    EXPECT_FALSE(g.occupied(p.cells[k].i, p.cells[k].j));
    if (k == 0) continue;
    const int di = p.cells[k].i - p.cells[k - 1].i, dj = p.cells[k].j - p.cells[k - 1].j;
    ASSERT_LE(std::max(std::abs(di), std::abs(dj)), 1);
    ASSERT_TRUE(detail::can_step(g, p.cells[k - 1].i, p.cells[k - 1].j, di, dj));
    len += (di != 0 && dj != 0) ? std::sqrt(2.0) : 1.0;
  }
  EXPECT_NEAR(len, p.cost, 1e-9);
}

}  // namespace

TEST(Planner, JumpPointSearchMatchesDijkstra) {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> ci(0, 39);
  int found = 0;
  for (int t = 0; t < 200; ++t) {
    const OccupancyGrid g = random_grid(rng, 40, 40, 0.25);
    const Cell s{ci(rng), ci(rng)}, goal{ci(rng), ci(rng)};
    const GridPath ref = dijkstra(g, s, goal);
    const GridPath jps = jump_point_search(g, s, goal);
    ASSERT_EQ(ref.found, jps.found) << t;
    if (!ref.found) continue;
    ++found;
    EXPECT_NEAR(jps.cost, ref.cost, 1e-9) << t;
    expect_valid_path(g, jps, s, goal);
    expect_valid_path(g, ref, s, goal);
  }
  EXPECT_GT(found, 50);
}

TEST(Planner, BlockedEndpointsHaveNoPath) {
  OccupancyGrid g(0.1, 5, 5, Eigen::Vector2d::Zero());
  g.set(4, 4, true);
  EXPECT_FALSE(jump_point_search(g, {0, 0}, {4, 4}).found);
  for (int j = 0; j < 5; ++j) g.set(2, j, true);
  EXPECT_FALSE(jump_point_search(g, {0, 0}, {4, 0}).found);
  EXPECT_FALSE(dijkstra(g, {0, 0}, {4, 0}).found);
}

TEST(Planner, NoCornerCutting) {
  OccupancyGrid g(0.1, 3, 3, Eigen::Vector2d::Zero());
  g.set(1, 0, true);
  g.set(0, 1, true);
  EXPECT_FALSE(jump_point_search(g, {0, 0}, {2, 2}).found);
}

TEST(Planner, SmoothedPathKeepsLineOfSight) {
  std::mt19937_64 rng(62);
  for (int t = 0; t < 20; ++t) {
    const OccupancyGrid g = random_grid(rng, 30, 30, 0.15);
    const Cell s{1, 1}, goal{28, 28};
    const GridPath p = jump_point_search(g, s, goal);
    if (!p.found) continue;
    const auto pts = smooth_path(g, p, g.cell_center(s.i, s.j), g.cell_center(goal.i, goal.j));
    for (size_t k = 1; k < pts.size(); ++k) EXPECT_TRUE(line_of_sight(g, pts[k - 1], pts[k]));
  }
}

TEST(Polyline, ProjectionAndArcLength) {
  const Polyline pl({{0, 0}, {2, 0}, {2, 1}});
  EXPECT_DOUBLE_EQ(pl.length(), 3.0);
  const auto pr = pl.project(Eigen::Vector2d(1.0, 0.3));
  EXPECT_NEAR(pr.s, 1.0, 1e-12);
  EXPECT_NEAR(pr.distance, 0.3, 1e-12);
  EXPECT_TRUE(pl.point_at(2.5).isApprox(Eigen::Vector2d(2, 0.5)));
  EXPECT_TRUE(pl.tangent_at(2.5).isApprox(Eigen::Vector2d(0, 1)));
}

TEST(LocalReference, IdentityAtTheGoal) {
  const Polyline pl({{0, 0}, {1, 0}});
  const Pose robot = Pose::planar(0.98, 0.01, 0.4);
  const LocalReference ref = local_reference(pl, robot, 0.8, 0.1);
  EXPECT_LT((ref.body.R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(ref.body.p.norm(), 1e-12);
}

TEST(LocalReference, LookaheadAlongPath) {
  const Polyline pl({{0, 0}, {5, 0}});
  const LocalReference ref = local_reference(pl, Pose::planar(1.0, 0.2, 0.0), 0.8, 0.1);
  EXPECT_NEAR(ref.point.x(), 1.8, 1e-12);
  EXPECT_NEAR(ref.cross_track, 0.2, 1e-12);
  EXPECT_NEAR(ref.body.p.y(), -0.2, 1e-12);
}
