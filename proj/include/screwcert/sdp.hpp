#pragma once

// Standard-form conic programs and a dense primal-dual interior-point solver.
//
//   primal:  min c'x   s.t.  A x = b,  x in K
//   dual:    max b'y   s.t.  c - A'y = s,  s in K*
//
// K is a product, in this order, of PSD blocks, one nonnegative orthant
// block and one free block (whose dual slack is fixed at zero). A PSD block
// of side n occupies n(n+1)/2 entries of x, stored as svec: the lower
// triangle column by column with off-diagonal entries scaled by sqrt(2), so
// <X, S> = svec(X)'svec(S).
//
// The solver follows the infeasible primal-dual path with the HKM search
// direction and a Mehrotra predictor-corrector. Free variables enter the
// Newton system through a saddle-point block, solved by eliminating the
// Schur complement first.

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace screwcert::sdp {

inline constexpr double kSqrt2 = 1.41421356237309504880;

inline int svec_size(int n) { return n * (n + 1) / 2; }

/// Position of entry (i, j), i >= j, inside svec of an n x n matrix.
inline int svec_index(int n, int i, int j) {
  if (i < j) std::swap(i, j);
  return j * n - j * (j - 1) / 2 + (i - j);
}

inline Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v(svec_size(n));
  int t = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) v(t++) = (i == j) ? m(i, j) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
  }
  return v;
}

template <typename Vec>
Eigen::MatrixXd smat(const Vec& v, int n) {
  Eigen::MatrixXd m(n, n);
  int t = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      const double val = (i == j) ? v(t) : v(t) / kSqrt2;
      m(i, j) = val;
      m(j, i) = val;
      ++t;
    }
  }
  return m;
}

struct ConeSpec {
  std::vector<int> psd;
  int nonneg = 0;
  int free = 0;

  int psd_dim() const {
    int d = 0;
    for (int n : psd) d += svec_size(n);
    return d;
  }
  int dim() const { return psd_dim() + nonneg + free; }
  /// Barrier degree nu = sum of PSD sides plus the orthant size.
  int degree() const {
    int d = nonneg;
    for (int n : psd) d += n;
    return d;
  }
  int nonneg_offset() const { return psd_dim(); }
  int free_offset() const { return psd_dim() + nonneg; }
};

struct ConicProblem {
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;
  Eigen::VectorXd b;
  ConeSpec cones;

  int num_constraints() const { return static_cast<int>(A.rows()); }
  int num_variables() const { return static_cast<int>(A.cols()); }

  /// Throws std::invalid_argument when dimensions or cones are inconsistent.
  void validate() const {
    const int n = cones.dim();
    if (c.size() != n || A.cols() != n) {
      throw std::invalid_argument("ConicProblem: variable dimension mismatch");
    }
    if (b.size() != A.rows()) throw std::invalid_argument("ConicProblem: b size mismatch");
    for (int side : cones.psd) {
      if (side < 1) throw std::invalid_argument("ConicProblem: PSD block side < 1");
    }
    for (int r = 0; r < A.outerSize(); ++r) {
      bool any = false;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, r); it; ++it) {
        if (it.value() != 0.0) any = true;
      }
      if (!any) throw std::invalid_argument("ConicProblem: all-zero constraint row");
    }
  }

  /// Removes all-zero rows of A. Returns false when one of them has a
  /// nonzero right-hand side (the system is then trivially inconsistent).
  bool drop_empty_rows() {
    std::vector<int> keep;
    bool consistent = true;
    for (int r = 0; r < A.outerSize(); ++r) {
      bool any = false;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, r); it; ++it) {
        if (it.value() != 0.0) any = true;
      }
      if (any) {
        keep.push_back(r);
      } else if (b(r) != 0.0) {
        consistent = false;
      }
    }
    if (static_cast<Eigen::Index>(keep.size()) == A.rows()) return consistent;
    Eigen::SparseMatrix<double, Eigen::RowMajor> A2(static_cast<Eigen::Index>(keep.size()), A.cols());
    Eigen::VectorXd b2(static_cast<Eigen::Index>(keep.size()));
    std::vector<Eigen::Triplet<double>> trip;
    for (size_t k = 0; k < keep.size(); ++k) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, keep[k]); it; ++it) {
        trip.emplace_back(static_cast<int>(k), static_cast<int>(it.col()), it.value());
      }
      b2(static_cast<Eigen::Index>(k)) = b(keep[k]);
    }
    A2.setFromTriplets(trip.begin(), trip.end());
    A = std::move(A2);
    b = std::move(b2);
    return consistent;
  }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter, NumericalError };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::NumericalError: return "NumericalError";
  }
  return "?";
}

struct SolverOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iter = 200;
  double step_fraction = 0.98;
  /// Stop when the best max(pinf, dinf, gap) has not improved for this many iterations.
  int stall_iterations = 15;
  bool verbose = false;
};

struct ConicSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd s;
  SolveStatus status = SolveStatus::NumericalError;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;  // ||b - Ax|| / (1 + ||b||)
  double dual_residual = 0.0;    // ||c - A'y - s|| / (1 + ||c||)
  double gap = 0.0;              // |c'x - b'y| / (1 + |c'x| + |b'y|)
  int iterations = 0;
  double solve_seconds = 0.0;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

namespace detail {

struct Triplet {
  int p;
  int q;
  double a;
};

/// Sparse symmetric matrix of one constraint row restricted to a PSD block.
struct BlockRow {
  int row;
  std::vector<Triplet> entries;  // both (p,q) and (q,p) for off-diagonals
};

struct BlockLayout {
  int side = 0;
  int offset = 0;
  std::vector<BlockRow> rows;
};

inline double min_eig_step(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX) {
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXd Linv_dX =
      llt.matrixL().solve(dX);
  const Eigen::MatrixXd T =
      llt.matrixL().solve(Linv_dX.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (T + T.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Reference dense solver. Adequate for PSD blocks up to roughly 100 x 100
/// and a few hundred constraints.
inline ConicSolution solve(const ConicProblem& prob, const SolverOptions& opt = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const auto t0 = std::chrono::steady_clock::now();
  prob.validate();

  const ConeSpec& K = prob.cones;
  const int m = prob.num_constraints();
  const int n = prob.num_variables();
  const int lp_off = K.nonneg_offset();
  const int nlp = K.nonneg;
  const int f_off = K.free_offset();
  const int nf = K.free;
  const double nu = std::max(1, K.degree());

  // Per-block sparse row structure.
  std::vector<detail::BlockLayout> blocks;
  std::vector<int> var_block(static_cast<size_t>(n), -1);
  {
    int off = 0;
    for (int side : K.psd) {
      detail::BlockLayout bl;
      bl.side = side;
      bl.offset = off;
      for (int t = 0; t < svec_size(side); ++t) var_block[static_cast<size_t>(off + t)] = static_cast<int>(blocks.size());
      off += svec_size(side);
      blocks.push_back(std::move(bl));
    }
    // Map svec position -> (i, j) per block side.
    std::vector<std::vector<std::pair<int, int>>> pos(blocks.size());
    for (size_t k = 0; k < blocks.size(); ++k) {
      const int s = blocks[k].side;
      for (int j = 0; j < s; ++j)
        for (int i = j; i < s; ++i) pos[k].emplace_back(i, j);
    }
    for (int r = 0; r < m; ++r) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(prob.A, r); it; ++it) {
        const int col = static_cast<int>(it.col());
        const int k = col < static_cast<int>(var_block.size()) ? var_block[static_cast<size_t>(col)] : -1;
        if (k < 0 || it.value() == 0.0) continue;
        auto& rows = blocks[static_cast<size_t>(k)].rows;
        if (rows.empty() || rows.back().row != r) rows.push_back({r, {}});
        const auto [i, j] = pos[static_cast<size_t>(k)][static_cast<size_t>(col - blocks[static_cast<size_t>(k)].offset)];
        if (i == j) {
          rows.back().entries.push_back({i, i, it.value()});
        } else {
          const double a = it.value() / kSqrt2;
          rows.back().entries.push_back({i, j, a});
          rows.back().entries.push_back({j, i, a});
        }
      }
    }
  }

  const Eigen::SparseMatrix<double, Eigen::RowMajor>& A = prob.A;
  const Eigen::SparseMatrix<double, Eigen::ColMajor> AT_cols = A;  // for column access
  MatrixXd Af = MatrixXd::Zero(m, nf);
  for (int r = 0; r < m; ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, r); it; ++it) {
      if (it.col() >= f_off) Af(r, it.col() - f_off) = it.value();
    }
  }

  // Initial point (scaled identities, following common practice).
  VectorXd x = VectorXd::Zero(n);
  VectorXd s = VectorXd::Zero(n);
  VectorXd y = VectorXd::Zero(m);
  {
    std::vector<double> row_norm_blk(blocks.size(), 0.0);
    for (size_t k = 0; k < blocks.size(); ++k) {
      const auto& bl = blocks[k];
      double xi = std::max(10.0, std::sqrt(static_cast<double>(bl.side)));
      double normA = 0.0;
      for (const auto& br : bl.rows) {
        double fro = 0.0;
        for (const auto& e : br.entries) fro += e.a * e.a;
        fro = std::sqrt(fro);
        normA = std::max(normA, fro);
        xi = std::max(xi, bl.side * (1.0 + std::abs(prob.b(br.row))) / (1.0 + fro));
      }
      const double cnorm = prob.c.segment(bl.offset, svec_size(bl.side)).norm();
      const double eta = std::max({10.0, std::sqrt(static_cast<double>(bl.side)),
                                   std::max(cnorm, normA) / std::sqrt(static_cast<double>(bl.side))});
      x.segment(bl.offset, svec_size(bl.side)) = svec(xi * MatrixXd::Identity(bl.side, bl.side));
      s.segment(bl.offset, svec_size(bl.side)) = svec(eta * MatrixXd::Identity(bl.side, bl.side));
    }
    if (nlp > 0) {
      double xi = std::max(10.0, std::sqrt(static_cast<double>(nlp)));
      double normA = 0.0;
      for (int j = 0; j < nlp; ++j) {
        const double col_norm = AT_cols.col(lp_off + j).norm();
        normA = std::max(normA, col_norm);
      }
      xi = std::max(xi, (1.0 + prob.b.cwiseAbs().maxCoeff()) / (1.0 + normA));
      const double eta = std::max({10.0, std::sqrt(static_cast<double>(nlp)),
                                   std::max(prob.c.segment(lp_off, nlp).norm(), normA)});
      x.segment(lp_off, nlp).setConstant(xi);
      s.segment(lp_off, nlp).setConstant(eta);
    }
  }

  ConicSolution sol;
  const double b_norm = prob.b.norm();
  const double c_norm = prob.c.norm();

  auto inner_cone = [&](const VectorXd& a, const VectorXd& bb) {
    return a.head(f_off).dot(bb.head(f_off));
  };

  // Per-block matrices reused within an iteration.
  std::vector<MatrixXd> Xm(blocks.size()), Sm(blocks.size()), Sinv(blocks.size());

  // Applies H(V) = sym(X V S^-1) on PSD blocks and (x/s) v on the orthant.
  auto apply_H = [&](const VectorXd& v) {
    VectorXd out = VectorXd::Zero(n);
    for (size_t k = 0; k < blocks.size(); ++k) {
      const auto& bl = blocks[k];
      const MatrixXd V = smat(v.segment(bl.offset, svec_size(bl.side)), bl.side);
      const MatrixXd G = Xm[k] * V * Sinv[k];
      out.segment(bl.offset, svec_size(bl.side)) = svec(0.5 * (G + G.transpose()));
    }
    for (int j = 0; j < nlp; ++j) out(lp_off + j) = x(lp_off + j) / s(lp_off + j) * v(lp_off + j);
    return out;
  };

  // Best iterate so far by max(pinf, dinf, gap); returned when the run ends
  // without meeting the tolerances.
  struct Snapshot {
    VectorXd x, y, s;
    double score = std::numeric_limits<double>::infinity();
    ConicSolution info;
  } best;
  int since_best = 0;

  int iter = 0;
  bool done = false;
  while (!done) {
    // Residuals and objectives.
    const VectorXd rp = prob.b - A * x;
    VectorXd rd = prob.c - A.transpose() * y - s;
    const double pobj = prob.c.dot(x);
    const double dobj = prob.b.dot(y);
    const double mu = inner_cone(x, s) / nu;
    sol.primal_residual = rp.norm() / (1.0 + b_norm);
    sol.dual_residual = rd.norm() / (1.0 + c_norm);
    sol.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    sol.primal_objective = pobj;
    sol.dual_objective = dobj;
    sol.iterations = iter;

    if (opt.verbose) {
      std::fprintf(stderr, "it %3d pobj % .10e dobj % .10e pinf %.2e dinf %.2e gap %.2e mu %.2e\n",
                   iter, pobj, dobj, sol.primal_residual, sol.dual_residual, sol.gap, mu);
    }
    if (!std::isfinite(pobj) || !std::isfinite(dobj) || !std::isfinite(mu)) {
      sol.status = SolveStatus::NumericalError;
      break;
    }
    const double cone_mu_rel = mu * nu / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double score = std::max({sol.primal_residual, sol.dual_residual, sol.gap});
    if (score < best.score) {
      best.score = score;
      best.x = x;
      best.y = y;
      best.s = s;
      best.info = sol;
      since_best = 0;
    } else if (++since_best >= opt.stall_iterations) {
      sol.status = SolveStatus::NumericalError;
      break;
    }
    if (sol.primal_residual <= opt.feas_tol && sol.dual_residual <= opt.feas_tol &&
        sol.gap <= opt.gap_tol && cone_mu_rel <= 10.0 * opt.gap_tol) {
      sol.status = SolveStatus::Optimal;
      break;
    }
    // Farkas-type certificates: iterates growing along an improving ray.
    {
      const VectorXd ATy = A.transpose() * y;
      VectorXd homog_d = -ATy;
      homog_d.head(f_off) -= s.head(f_off);
      if (dobj > 0.0 && homog_d.norm() <= 1e-8 * dobj && y.norm() > 1e6) {
        sol.status = SolveStatus::Infeasible;
        break;
      }
      const VectorXd Ax = A * x;
      if (pobj < 0.0 && Ax.norm() <= 1e-8 * (-pobj) && x.norm() > 1e6) {
        sol.status = SolveStatus::Unbounded;
        break;
      }
    }
    if (iter >= opt.max_iter) {
      sol.status = SolveStatus::MaxIter;
      break;
    }

    // Block matrices.
    bool block_ok = true;
    for (size_t k = 0; k < blocks.size(); ++k) {
      const auto& bl = blocks[k];
      Xm[k] = smat(x.segment(bl.offset, svec_size(bl.side)), bl.side);
      Sm[k] = smat(s.segment(bl.offset, svec_size(bl.side)), bl.side);
      Eigen::LLT<MatrixXd> llt(Sm[k]);
      if (llt.info() != Eigen::Success) {
        block_ok = false;
        break;
      }
      Sinv[k] = llt.solve(MatrixXd::Identity(bl.side, bl.side));
      Sinv[k] = 0.5 * (Sinv[k] + Sinv[k].transpose());
    }
    if (!block_ok) {
      sol.status = SolveStatus::NumericalError;
      break;
    }

    // Schur complement M = A_K H A_K'.
    MatrixXd M = MatrixXd::Zero(m, m);
    for (size_t k = 0; k < blocks.size(); ++k) {
      const auto& bl = blocks[k];
      MatrixXd G(bl.side, bl.side);
      for (size_t ri = 0; ri < bl.rows.size(); ++ri) {
        const auto& r1 = bl.rows[ri];
        G.setZero();
        for (const auto& e : r1.entries) G.noalias() += e.a * Xm[k].col(e.p) * Sinv[k].row(e.q);
        for (size_t rj = ri; rj < bl.rows.size(); ++rj) {
          const auto& r2 = bl.rows[rj];
          double v = 0.0;
          for (const auto& e : r2.entries) v += e.a * G(e.q, e.p);
          M(r1.row, r2.row) += v;
          if (rj != ri) M(r2.row, r1.row) += v;
        }
      }
    }
    if (nlp > 0) {
      for (int j = 0; j < nlp; ++j) {
        const double d = x(lp_off + j) / s(lp_off + j);
        for (Eigen::SparseMatrix<double>::InnerIterator i1(AT_cols, lp_off + j); i1; ++i1) {
          for (Eigen::SparseMatrix<double>::InnerIterator i2(AT_cols, lp_off + j); i2; ++i2) {
            M(i1.row(), i2.row()) += d * i1.value() * i2.value();
          }
        }
      }
    }

    // Factor the saddle system [M Af; Af' 0] as a whole. Eliminating the
    // free block through M^-1 loses the primal residual once M becomes
    // ill-conditioned near the optimum.
    MatrixXd Kmat = MatrixXd::Zero(m + nf, m + nf);
    Kmat.topLeftCorner(m, m) = M;
    Kmat.topRightCorner(m, nf) = Af;
    Kmat.bottomLeftCorner(nf, m) = Af.transpose();
    const Eigen::PartialPivLU<MatrixXd> Klu(Kmat);
    auto solve_saddle = [&](const VectorXd& r1, const VectorXd& r2, VectorXd& dy, VectorXd& dxf) {
      VectorXd rhs(m + nf);
      rhs << r1, r2;
      VectorXd z = Klu.solve(rhs);
      for (int pass = 0; pass < 2; ++pass) z += Klu.solve(rhs - Kmat * z);
      dy = z.head(m);
      dxf = z.tail(nf);
    };

    const VectorXd rd_f = rd.tail(nf);
    VectorXd rd_cone = rd;
    rd_cone.tail(nf).setZero();

    // Solves the Newton system for residuals (rp, rd) and complementarity
    // right-hand side Rc.
    auto newton_raw = [&](const VectorXd& rp_in, const VectorXd& rdc_in, const VectorXd& rdf_in,
                          const VectorXd& Rc, VectorXd& dx, VectorXd& dy, VectorXd& ds) {
      const VectorXd HR = apply_H(rdc_in);
      VectorXd tmp = Rc - HR;
      tmp.tail(nf).setZero();
      const VectorXd r1 = rp_in - A * tmp;
      VectorXd dxf;
      solve_saddle(r1, rdf_in, dy, dxf);
      ds = rdc_in - A.transpose() * dy;
      ds.tail(nf).setZero();
      dx = Rc - apply_H(ds);
      dx.tail(nf) = dxf;
    };
    // With iterative refinement on the primal equations, which carry the
    // rounding error of the Schur solve.
    auto newton = [&](const VectorXd& Rc, VectorXd& dx, VectorXd& dy, VectorXd& ds) {
      newton_raw(rp, rd_cone, rd_f, Rc, dx, dy, ds);
      const VectorXd zero_n = VectorXd::Zero(n);
      const VectorXd zero_f = VectorXd::Zero(nf);
      double last = std::numeric_limits<double>::infinity();
      for (int pass = 0; pass < 8; ++pass) {
        const VectorXd e = rp - A * dx;
        const VectorXd ef = rd_f - Af.transpose() * dy;
        const double err = e.norm() + ef.norm();
        if (err <= 1e-15 * (1.0 + rp.norm()) || err >= 0.5 * last) break;
        last = err;
        VectorXd cx, cy, cs;
        newton_raw(e, zero_n, ef, zero_n, cx, cy, cs);
        dx += cx;
        dy += cy;
        ds += cs;
      }
    };

    auto max_steps = [&](const VectorXd& dx, const VectorXd& ds, double& ap, double& ad) {
      ap = std::numeric_limits<double>::infinity();
      ad = ap;
      for (size_t k = 0; k < blocks.size(); ++k) {
        const auto& bl = blocks[k];
        const MatrixXd dX = smat(dx.segment(bl.offset, svec_size(bl.side)), bl.side);
        const MatrixXd dS = smat(ds.segment(bl.offset, svec_size(bl.side)), bl.side);
        ap = std::min(ap, detail::min_eig_step(Xm[k], dX));
        ad = std::min(ad, detail::min_eig_step(Sm[k], dS));
      }
      for (int j = 0; j < nlp; ++j) {
        const int t = lp_off + j;
        if (dx(t) < 0.0) ap = std::min(ap, -x(t) / dx(t));
        if (ds(t) < 0.0) ad = std::min(ad, -s(t) / ds(t));
      }
    };

    // Predictor: Rc = -X.
    VectorXd Rc = VectorXd::Zero(n);
    Rc.head(f_off) = -x.head(f_off);
    VectorXd dx_a, dy_a, ds_a;
    newton(Rc, dx_a, dy_a, ds_a);
    double ap = 0.0, ad = 0.0;
    max_steps(dx_a, ds_a, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    const double mu_aff = inner_cone(x + ap * dx_a, s + ad * ds_a) / nu;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector: Rc = sigma mu S^-1 - X - sym(dXa dSa S^-1).
    for (size_t k = 0; k < blocks.size(); ++k) {
      const auto& bl = blocks[k];
      const MatrixXd dXa = smat(dx_a.segment(bl.offset, svec_size(bl.side)), bl.side);
      const MatrixXd dSa = smat(ds_a.segment(bl.offset, svec_size(bl.side)), bl.side);
      MatrixXd R = sigma * mu * Sinv[k] - Xm[k];
      const MatrixXd corr = dXa * dSa * Sinv[k];
      R -= 0.5 * (corr + corr.transpose());
      Rc.segment(bl.offset, svec_size(bl.side)) = svec(R);
    }
    for (int j = 0; j < nlp; ++j) {
      const int t = lp_off + j;
      Rc(t) = sigma * mu / s(t) - x(t) - dx_a(t) * ds_a(t) / s(t);
    }
    VectorXd dx, dy, ds;
    newton(Rc, dx, dy, ds);
    max_steps(dx, ds, ap, ad);
    ap = std::min(1.0, opt.step_fraction * ap);
    ad = std::min(1.0, opt.step_fraction * ad);
    if (!(ap > 0.0) || !(ad > 0.0) || !dx.allFinite() || !dy.allFinite()) {
      sol.status = SolveStatus::NumericalError;
      break;
    }
    x += ap * dx;
    y += ad * dy;
    s += ad * ds;
    ++iter;
  }

  if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::Infeasible &&
      sol.status != SolveStatus::Unbounded && best.score < std::numeric_limits<double>::infinity()) {
    const SolveStatus st = sol.status;
    const int it = sol.iterations;
    sol = best.info;
    sol.status = st;
    sol.iterations = it;
    x = best.x;
    y = best.y;
    s = best.s;
  }
  sol.x = x;
  sol.y = y;
  sol.s = s;
  sol.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

/// <X_k, S_k> for every PSD block of a solution.
inline std::vector<double> block_complementarity(const ConicProblem& p, const ConicSolution& s) {
  std::vector<double> out;
  int off = 0;
  for (int side : p.cones.psd) {
    const int d = svec_size(side);
    out.push_back(s.x.segment(off, d).dot(s.s.segment(off, d)));
    off += d;
  }
  return out;
}

/// Extracts PSD block `k` of a svec-stacked vector as a dense matrix.
inline Eigen::MatrixXd block_matrix(const ConicProblem& p, const Eigen::VectorXd& v, int k) {
  int off = 0;
  for (int i = 0; i < k; ++i) off += svec_size(p.cones.psd[static_cast<size_t>(i)]);
  const int side = p.cones.psd[static_cast<size_t>(k)];
  return smat(v.segment(off, svec_size(side)), side);
}

/// Incremental builder for ConicProblem instances. Blocks and scalar
/// variables may be added in any order; columns are resolved in build().
class ProblemBuilder {
 public:
  int add_psd_block(int side) {
    if (side < 1) throw std::invalid_argument("ProblemBuilder: PSD side < 1");
    psd_.push_back(side);
    return static_cast<int>(psd_.size()) - 1;
  }
  int add_nonneg() { return nonneg_++; }
  int add_free() { return free_++; }

  int add_row(double rhs) {
    b_.push_back(rhs);
    return static_cast<int>(b_.size()) - 1;
  }
  int num_rows() const { return static_cast<int>(b_.size()); }

  /// Adds `a` to entries (i, j) and (j, i) of row `row`'s symmetric matrix on
  /// PSD block k.
  void add_psd(int row, int k, int i, int j, double a) {
    if (a != 0.0) entries_.push_back({row, Kind::Psd, k, i, j, a});
  }
  void add_nonneg(int row, int idx, double a) {
    if (a != 0.0) entries_.push_back({row, Kind::NonNeg, 0, idx, 0, a});
  }
  void add_free(int row, int idx, double a) {
    if (a != 0.0) entries_.push_back({row, Kind::Free, 0, idx, 0, a});
  }
  /// Cost entries use the same conventions with row = -1.
  void cost_psd(int k, int i, int j, double a) { add_psd(-1, k, i, j, a); }
  void cost_nonneg(int idx, double a) { add_nonneg(-1, idx, a); }
  void cost_free(int idx, double a) { add_free(-1, idx, a); }

  ConeSpec cones() const { return ConeSpec{psd_, nonneg_, free_}; }

  ConicProblem build() const {
    ConicProblem p;
    p.cones = cones();
    const int n = p.cones.dim();
    std::vector<int> psd_off;
    int off = 0;
    for (int side : psd_) {
      psd_off.push_back(off);
      off += svec_size(side);
    }
    p.c = Eigen::VectorXd::Zero(n);
    p.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b_.size()));
    for (size_t r = 0; r < b_.size(); ++r) p.b(static_cast<Eigen::Index>(r)) = b_[r];
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(entries_.size());
    for (const auto& e : entries_) {
      int col = 0;
      double v = e.a;
      switch (e.kind) {
        case Kind::Psd: {
          const int side = psd_.at(static_cast<size_t>(e.block));
          if (e.i < 0 || e.j < 0 || e.i >= side || e.j >= side) {
            throw std::out_of_range("ProblemBuilder: PSD entry outside block");
          }
          col = psd_off[static_cast<size_t>(e.block)] + svec_index(side, e.i, e.j);
          if (e.i != e.j) v *= kSqrt2;
          break;
        }
        case Kind::NonNeg:
          col = p.cones.nonneg_offset() + e.i;
          break;
        case Kind::Free:
          col = p.cones.free_offset() + e.i;
          break;
      }
      if (e.row < 0) {
        p.c(col) += v;
      } else {
        trip.emplace_back(e.row, col, v);
      }
    }
    p.A.resize(static_cast<Eigen::Index>(b_.size()), n);
    p.A.setFromTriplets(trip.begin(), trip.end());
    p.A.prune(0.0);
    p.A.makeCompressed();
    return p;
  }

  /// Column of PSD entry (i, j) in the final layout.
  int psd_column(int k, int i, int j) const {
    int off = 0;
    for (int q = 0; q < k; ++q) off += svec_size(psd_[static_cast<size_t>(q)]);
    return off + svec_index(psd_.at(static_cast<size_t>(k)), i, j);
  }
  int nonneg_column(int idx) const { return cones().nonneg_offset() + idx; }
  int free_column(int idx) const { return cones().free_offset() + idx; }

 private:
  enum class Kind { Psd, NonNeg, Free };
  struct Entry {
    int row;
    Kind kind;
    int block;
    int i;
    int j;
    double a;
  };

  std::vector<int> psd_;
  int nonneg_ = 0;
  int free_ = 0;
  std::vector<double> b_;
  std::vector<Entry> entries_;
};

}  // namespace screwcert::sdp
