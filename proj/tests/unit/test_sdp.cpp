#include <random>

#include <gtest/gtest.h>

#include "screwcert/sdp.hpp"

using namespace screwcert::sdp;

namespace {

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = g(rng);
  return 0.5 * (M + M.transpose());
}

}  // namespace

TEST(Svec, PreservesTraceInnerProduct) {
  std::mt19937_64 rng(31);
  for (int n = 1; n <= 6; ++n) {
    const Eigen::MatrixXd A = random_symmetric(rng, n), B = random_symmetric(rng, n);
    EXPECT_NEAR(svec(A).dot(svec(B)), (A * B).trace(), 1e-12);
    EXPECT_LT((smat(svec(A), n) - A).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(svec(A).size(), svec_size(n));
  }
}

// min <C, X> s.t. tr X = 1, X psd has value lambda_min(C).
TEST(Solve, MinimumEigenvalueProgram) {
  std::mt19937_64 rng(32);
  for (int n = 2; n <= 8; ++n) {
    const Eigen::MatrixXd C = random_symmetric(rng, n);
    ProblemBuilder pb;
    const int blk = pb.add_psd_block(n);
    const int row = pb.add_row(1.0);
    for (int i = 0; i < n; ++i) {
      pb.add_psd(row, blk, i, i, 1.0);
      for (int j = i; j < n; ++j) pb.cost_psd(blk, i, j, i == j ? C(i, i) : C(i, j));
    }
    const ConicSolution s = solve(pb.build());
    ASSERT_EQ(s.status, SolveStatus::Optimal) << n;
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C).eigenvalues()(0);
    EXPECT_NEAR(s.primal_objective, lmin, 1e-7) << n;
    EXPECT_NEAR(s.dual_objective, lmin, 1e-7) << n;
  }
}

// min x1 + 2 x2 s.t. x1 + x2 = 1, x1 - z = 0.25, x >= 0, z free.
TEST(Solve, LinearProgramWithFreeVariable) {
  ProblemBuilder pb;
  const int x1 = pb.add_nonneg(), x2 = pb.add_nonneg(), z = pb.add_free();
  const int r0 = pb.add_row(1.0), r1 = pb.add_row(0.25);
  pb.add_nonneg(r0, x1, 1.0);
  pb.add_nonneg(r0, x2, 1.0);
  pb.add_nonneg(r1, x1, 1.0);
  pb.add_free(r1, z, -1.0);
  pb.cost_nonneg(x1, 1.0);
  pb.cost_nonneg(x2, 2.0);
  const ConicProblem p = pb.build();
  const ConicSolution s = solve(p);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.primal_objective, 1.0, 1e-7);
  EXPECT_NEAR(s.x(pb.nonneg_column(x1)), 1.0, 1e-6);
  EXPECT_NEAR(s.x(pb.free_column(z)), 0.75, 1e-6);
}

TEST(Solve, DetectsInfeasibility) {
  // x >= 0 and x = -1.
  ProblemBuilder pb;
  const int x = pb.add_nonneg();
  pb.add_nonneg(pb.add_row(-1.0), x, 1.0);
  pb.cost_nonneg(x, 1.0);
  EXPECT_EQ(solve(pb.build()).status, SolveStatus::Infeasible);
}

TEST(Solve, ComplementarityAtOptimum) {
  std::mt19937_64 rng(33);
  const Eigen::MatrixXd C = random_symmetric(rng, 5);
  ProblemBuilder pb;
  const int blk = pb.add_psd_block(5);
  const int row = pb.add_row(1.0);
  for (int i = 0; i < 5; ++i) {
    pb.add_psd(row, blk, i, i, 1.0);
    for (int j = i; j < 5; ++j) pb.cost_psd(blk, i, j, C(i, j));
  }
  const ConicProblem p = pb.build();
  const ConicSolution s = solve(p);
  ASSERT_TRUE(s.optimal());
  const Eigen::MatrixXd X = block_matrix(p, s.x, 0), S = block_matrix(p, s.s, 0);
  EXPECT_LT((X * S).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(X).eigenvalues().head(4).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Problem, ValidateCatchesInconsistency) {
  ProblemBuilder pb;
  pb.add_psd_block(2);
  pb.add_row(1.0);
  EXPECT_THROW(pb.build().validate(), std::invalid_argument);  // empty row
  EXPECT_THROW(pb.add_psd_block(0), std::invalid_argument);
}
