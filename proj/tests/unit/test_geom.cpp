#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "screwcert/geom.hpp"
#include "screwcert/relax.hpp"
#include "screwcert/setspec.hpp"

using namespace screwcert;

TEST(Shapes, PolygonVerticesLieOnTheBoundary) {
  for (const auto& [name, params] : std::vector<std::pair<std::string, std::vector<double>>>{
           {"triangle", {0.25}}, {"hexagon", {0.2}}, {"diamond", {0.3, 0.18}}, {"rectangle", {0.3, 0.63}}}) {
    const SemialgebraicSet s = shape_library(name, params);
    ASSERT_TRUE(s.is_polygon()) << name;
    for (const auto& v : s.polygon) {
      EXPECT_TRUE(s.contains(Eigen::VectorXd(v), 1e-12)) << name;
      EXPECT_NEAR(s.min_value(Eigen::VectorXd(v)), 0.0, 1e-12) << name;
      EXPECT_LE(v.norm(), s.enclosing_radius + 1e-12) << name;
    }
    EXPECT_TRUE(s.contains(s.witness)) << name;
  }
}

TEST(Shapes, RectangleIsWidthThenLength) {
  const SemialgebraicSet r = shape_library("rectangle", {0.3, 0.63});
  EXPECT_TRUE(r.contains(Eigen::Vector2d(0.31, 0.14)));
  EXPECT_FALSE(r.contains(Eigen::Vector2d(0.14, 0.31)));
}

TEST(Shapes, BadParametersThrow) {
  EXPECT_THROW(shape_library("hexagon", {}), std::invalid_argument);
  EXPECT_THROW(shape_library("hexagon", {-1.0}), std::invalid_argument);
  EXPECT_THROW(shape_library("blob", {1.0}), std::invalid_argument);
}

TEST(Polytope, BoxAndShrink) {
  const Polytope B = Polytope::box(Eigen::Vector2d(-1, -2), Eigen::Vector2d(1, 2));
  EXPECT_TRUE(B.contains(Eigen::Vector2d(0.99, -1.99)));
  EXPECT_FALSE(B.contains(Eigen::Vector2d(1.01, 0)));
  const Polytope S = B.shrunk(0.1);
  EXPECT_FALSE(S.contains(Eigen::Vector2d(0.95, 0)));
  EXPECT_NEAR(S.min_value(Eigen::Vector2d(0, 0)), 0.9, 1e-12);
}

TEST(RegionCoefficients, AgreeWithNumericMapping) {
  std::mt19937_64 rng(21);
  const SymbolicPose sp = symbolic_pose(0.2, true);
  const oracle::Body body = oracle::Body::from_set(shape_library("hexagon", {0.2}));
  std::uniform_real_distribution<double> v(-0.35, 0.35);
  for (int t = 0; t < 30; ++t) {
    const Polytope B = oracle::random_region(body, rng, 4);
    const RegionCoefficients rc = region_coefficients(B, sp);
    const double w = static_cast<double>(static_cast<int>(rng() % 3) - 1);
    const ScrewControl u = ScrewControl::planar_control(w, v(rng), v(rng));
    const auto numeric = mapped_faces(B, exp_map(u, 0.2));
    ASSERT_EQ(numeric.size(), rc.faces.size());
    for (size_t i = 0; i < numeric.size(); ++i) {
      EXPECT_LT(rc.face_polynomial(i, u.to_vector()).max_abs_difference(numeric[i]), 1e-12);
    }
  }
}

TEST(SampleBoundary, EllipsePointsAreOnTheCurve) {
  const SemialgebraicSet e = shape_library("ellipse", {0.3, 0.15});
  for (const auto& x : sample_boundary(e, 64)) EXPECT_NEAR(e.polys[0].evaluate(x), 0.0, 1e-9);
}

TEST(OccupancyGrid, TextRoundTrip) {
  OccupancyGrid g(0.05, 7, 5, Eigen::Vector2d(-0.1, 0.2));
  g.set(0, 0, true);
  g.set(6, 4, true);
  g.set(3, 2, true);
  const OccupancyGrid h = OccupancyGrid::from_text(g.to_text());
  ASSERT_EQ(h.width(), 7);
  ASSERT_EQ(h.height(), 5);
  EXPECT_DOUBLE_EQ(h.resolution(), 0.05);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_EQ(g.occupied(i, j), h.occupied(i, j));
  EXPECT_TRUE(g.occupied(-1, 0));
}

// Every point of the extracted region keeps the inflation distance to every
// occupied cell centre, and the seed footprint stays inside.
TEST(FreeRegion, ExcludesEveryInflatedObstacle) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto foot = shape_library("hexagon", {0.15}).polygon;
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    OccupancyGrid g(0.05, 60, 60, Eigen::Vector2d::Zero());
    for (int k = 0; k < 12; ++k) g.fill_disc(Eigen::Vector2d(3.0 * u01(rng), 3.0 * u01(rng)), 0.1);
    const Pose seed = Pose::planar(1.5, 1.5, 2.0 * std::numbers::pi * u01(rng));
    FreeRegionOptions opt;
    opt.inflation = 0.03;
    // The footprint is kept only when it clears every inflated obstacle.
    const Eigen::Matrix2d Rt = seed.R.topLeftCorner<2, 2>().transpose();
    bool blocked = g.occupied_at(seed.p.head<2>());
    for (int i = 0; i < g.width() && !blocked; ++i) {
      for (int j = 0; j < g.height() && !blocked; ++j) {
        if (!g.occupied(i, j)) continue;
        const Eigen::Vector2d q = Rt * (g.cell_center(i, j) - seed.p.head<2>());
        blocked = (q - closest_point_on_polygon(foot, q)).norm() <= opt.inflation;
      }
    }
    if (blocked) continue;
    opt.seed_footprint = foot;
    const Polytope B = extract_free_region(g, seed, 1.0, opt);
    ++checked;
    for (const auto& v : foot) EXPECT_TRUE(B.contains(Eigen::VectorXd(v), 1e-9));
    for (int s = 0; s < 400; ++s) {
      const Eigen::Vector2d xb(2.0 * u01(rng) - 1.0, 2.0 * u01(rng) - 1.0);
      if (!B.contains(Eigen::VectorXd(xb))) continue;
      const Eigen::Vector2d xw = seed.apply2(xb);
      for (int i = 0; i < g.width(); ++i) {
        for (int j = 0; j < g.height(); ++j) {
          if (g.occupied(i, j)) {
            EXPECT_GE((xw - g.cell_center(i, j)).norm(), opt.inflation - 1e-9);
          }
        }
      }
    }
  }
  EXPECT_GT(checked, 5);
}

TEST(FreeRegion, OccupiedSeedThrows) {
  OccupancyGrid g(0.1, 10, 10, Eigen::Vector2d::Zero());
  g.set(5, 5, true);
  EXPECT_THROW(extract_free_region(g, Pose::planar(0.55, 0.55, 0), 1.0), SeedOccupied);
}

TEST(SetSpec, ParsesEveryKind) {
  const SemialgebraicSet b = parse_set_spec("box:-1,-2,1,2");
  EXPECT_TRUE(b.contains(Eigen::Vector2d(0.9, 1.9)));
  EXPECT_FALSE(b.contains(Eigen::Vector2d(1.1, 0)));
  const SemialgebraicSet d = parse_set_spec("poly:1:1 - x1^2 - x2^2");
  EXPECT_TRUE(d.contains(Eigen::Vector2d(0.6, 0.6)));
  EXPECT_FALSE(d.contains(Eigen::Vector2d(0.8, 0.8)));
  EXPECT_EQ(parse_set_spec("ellipse:0.3,0.15").polys.size(), 1u);
  EXPECT_EQ(parse_set_spec("hexagon:0.2").polygon.size(), 6u);
}

TEST(SetSpec, RejectsMalformedText) {
  EXPECT_THROW(parse_set_spec("box"), SetSpecError);
  EXPECT_THROW(parse_set_spec("box:1,1,0,0"), SetSpecError);
  EXPECT_THROW(parse_set_spec("box:1,a,2,3"), SetSpecError);
  EXPECT_THROW(parse_set_spec("poly:-1:x1"), SetSpecError);
  EXPECT_THROW(parse_set_spec("poly:1:x1 +"), SetSpecError);
  EXPECT_THROW(parse_set_spec("blob:1"), SetSpecError);
}
