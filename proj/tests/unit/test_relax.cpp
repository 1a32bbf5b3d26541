#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "screwcert/relax.hpp"

using namespace screwcert;

namespace {

constexpr double kTheta = 0.2;
constexpr double kVLimit = 0.5;

TrackingObjective objective_for(const Pose& ref) {
  return build_objective(ref, Eigen::Vector3d(5, 2, 0).asDiagonal(), 0.1 * Matrix9d::Identity(),
                         symbolic_pose(kTheta, true));
}

}  // namespace

TEST(Objective, MatchesDirectCost) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> v(-0.35, 0.35);
  for (int t = 0; t < 20; ++t) {
    const Pose ref = oracle::random_reference(rng, kTheta, kVLimit);
    const TrackingObjective obj = objective_for(ref);
    const double w = static_cast<double>(static_cast<int>(rng() % 3) - 1);
    const ScrewControl u = ScrewControl::planar_control(w, v(rng), v(rng));
    const Pose m = oracle::expm_pose(u, kTheta);
    const Eigen::Vector3d ep = m.p - ref.p;
    const Eigen::Matrix3d eR = m.R - ref.R;
    const Eigen::Map<const Eigen::Matrix<double, 9, 1>> vecR(eR.data());
    const double Jp = ep.dot(Eigen::Vector3d(5, 2, 0).asDiagonal() * ep);
    const double JR = 0.1 * vecR.squaredNorm();
    EXPECT_NEAR(obj.J.evaluate(u.to_vector()), Jp + JR, 1e-10);
    EXPECT_NEAR(obj.J_p.evaluate(u.to_vector()), Jp, 1e-10);
    EXPECT_NEAR(obj.J_R.evaluate(u.to_vector()), JR, 1e-10);
  }
}

TEST(FeasibleSet, ContainsAdmissibleControls) {
  const FeasibleSet G = FeasibleSet::make(true, kVLimit);
  EXPECT_TRUE(G.contains(ScrewControl::planar_control(1, 0.3, 0.3)));
  EXPECT_TRUE(G.contains(ScrewControl::planar_control(0, 0.5, 0.0)));
  EXPECT_FALSE(G.contains(ScrewControl::planar_control(0.5, 0.1, 0.0)));
  EXPECT_FALSE(G.contains(ScrewControl::planar_control(-1, 0.4, 0.4)));
  EXPECT_THROW(FeasibleSet::make(true, 0.0), std::invalid_argument);
}

TEST(Assemble, OrderChecks) {
  const TrackingObjective obj = objective_for(Pose::planar(0.05, 0.0, 0.0));
  const FeasibleSet G = FeasibleSet::make(true, kVLimit);
  const SemialgebraicSet A = shape_library("ellipse", {0.3, 0.15});
  const RegionCoefficients rc = region_coefficients(Polytope::box(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)),
                                                    symbolic_pose(kTheta, true));
  EXPECT_THROW(assemble(obj, G, A, rc, 1, 1), DegreeOverflow);
  const MomentProgram mp = assemble(obj, G, A, rc, 1, 3);
  EXPECT_EQ(mp.min_order, min_relaxation_order(obj, G, rc));
  EXPECT_TRUE(mp.facially_reduced);
  EXPECT_NO_THROW(mp.problem.validate());
}

// The lower bound never exceeds the brute-force optimum over the grid of
// certified motions, and a flat solution achieves it.
TEST(SolveStep, LowerBoundBelowGridOptimum) {
  const SemialgebraicSet A = shape_library("hexagon", {0.2});
  const oracle::Body body = oracle::Body::from_set(A);
  const FeasibleSet G = FeasibleSet::make(true, kVLimit);
  const SymbolicPose sp = symbolic_pose(kTheta, true);
  std::mt19937_64 rng(52);
  for (int t = 0; t < 4; ++t) {
    const Polytope B = oracle::random_region(body, rng, 3);
    const TrackingObjective obj = objective_for(oracle::random_reference(rng, kTheta, kVLimit));
    const MomentProgram mp = assemble(obj, G, A, region_coefficients(B, sp), 1, 3);
    StepOptions opt;
    opt.theta_step = kTheta;
    const ControlResult r = solve_step(mp, B, opt);
    ASSERT_TRUE(r.safe()) << to_string(r.status);
    const oracle::GridBest grid = oracle::grid_oracle(obj.J, body, B, kTheta, kVLimit);
    EXPECT_LE(r.lower_bound, grid.J + 1e-6);
    ASSERT_TRUE(r.achieved.has_value());
    EXPECT_LE(*r.achieved, grid.J + 1e-3);
    EXPECT_GE(*r.achieved, r.lower_bound - 1e-6);
    // The returned motion keeps the body inside B.
    EXPECT_GE(oracle::exact_margin(body, B, exp_map(*r.control, kTheta)), -1e-7);
    if (r.status == StepStatus::ExactRank1) {
      EXPECT_NEAR(*r.achieved, r.lower_bound, 1e-4);
    }
  }
}

TEST(SolveStep, FacialReductionKeepsTheOptimum) {
  const SemialgebraicSet A = shape_library("triangle", {0.2});
  const oracle::Body body = oracle::Body::from_set(A);
  const FeasibleSet G = FeasibleSet::make(true, kVLimit);
  std::mt19937_64 rng(53);
  const Polytope B = oracle::random_region(body, rng, 3);
  const TrackingObjective obj = objective_for(oracle::random_reference(rng, kTheta, kVLimit));
  const RegionCoefficients rc = region_coefficients(B, symbolic_pose(kTheta, true));
  const auto reduced = sdp::solve(assemble(obj, G, A, rc, 1, 3, true).problem);
  const auto plain = sdp::solve(assemble(obj, G, A, rc, 1, 3, false).problem);
  ASSERT_TRUE(reduced.optimal());
  EXPECT_NEAR(reduced.dual_objective, plain.dual_objective, 1e-5);
}

TEST(Hierarchy, BoundsIncreaseWithOrder) {
  const SemialgebraicSet A = shape_library("diamond", {0.2});
  const oracle::Body body = oracle::Body::from_set(A);
  const FeasibleSet G = FeasibleSet::make(true, kVLimit);
  std::mt19937_64 rng(54);
  for (int t = 0; t < 2; ++t) {
    const Polytope B = oracle::random_region(body, rng, 4);
    const TrackingObjective obj = objective_for(oracle::random_reference(rng, kTheta, kVLimit));
    const auto sweep = hierarchy_sweep(obj, G, A, region_coefficients(B, symbolic_pose(kTheta, true)), 1, {3, 4});
    ASSERT_EQ(sweep.size(), 2u);
    EXPECT_LE(sweep[0].second, sweep[1].second + 1e-7);
  }
}

TEST(Audit, PolygonMarginIsExact) {
  const SemialgebraicSet A = shape_library("hexagon", {0.2});
  const oracle::Body body = oracle::Body::from_set(A);
  std::mt19937_64 rng(55);
  for (int t = 0; t < 20; ++t) {
    const Polytope B = oracle::random_region(body, rng, 4);
    const Pose m = oracle::random_reference(rng, kTheta, kVLimit);
    EXPECT_NEAR(audit_margin(A, B, m), oracle::exact_margin(body, B, m), 1e-12);
  }
}
