#pragma once

// One control step as a polynomial optimization problem over the screw axis
// u, relaxed to a single SDP:
//
//   min  L_y(J)
//   s.t. y_0 = 1,  M_l[y] >= 0,  L_g[y] >= 0 (v-limit, ball),  L_geq[y] = 0,
//        L_y(c_i,beta) = coef_beta(sigma_i0 + sum_j sigma_ij f_j)  per face i,
//        Gram(sigma_ij) >= 0.
//
// The program is posed in the dual form of sdp::solve: the moments and the
// Gram entries are the dual vector z, every matrix inequality is a dual
// slack block, and each linear equality is one free primal coordinate.

#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "screwcert/certify.hpp"
#include "screwcert/geom.hpp"
#include "screwcert/polyalg.hpp"
#include "screwcert/screw.hpp"
#include "screwcert/sdp.hpp"

namespace screwcert {

using Matrix9d = Eigen::Matrix<double, 9, 9>;

struct TrackingObjective {
  Pose reference;
  Eigen::Matrix3d Q_p = Eigen::Matrix3d::Identity();
  Matrix9d Q_R = Matrix9d::Identity();
  Polynomial J;
  Polynomial J_p;
  Polynomial J_R;

  int num_control_vars() const { return J.num_vars(); }
};

/// J = e_p' Q_p e_p + e_R' Q_R e_R, e_p = p(u) - p_ref, e_R = vec(R(u) - R_ref)
/// with vec stacking columns.
inline TrackingObjective build_objective(const Pose& reference, const Eigen::Matrix3d& Q_p,
                                         const Matrix9d& Q_R, const SymbolicPose& sp) {
  auto check_psd = [](const Eigen::MatrixXd& Q, const char* what) {
    const Eigen::MatrixXd S = 0.5 * (Q + Q.transpose());
    if ((Q - S).cwiseAbs().maxCoeff() > 1e-12 ||
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().minCoeff() < -1e-12) {
      throw std::invalid_argument(std::string("build_objective: weight not symmetric PSD: ") + what);
    }
  };
  check_psd(Q_p, "Q_p");
  check_psd(Q_R, "Q_R");
  const int n = sp.num_control_vars;
  TrackingObjective obj;
  obj.reference = reference;
  obj.Q_p = Q_p;
  obj.Q_R = Q_R;

  std::array<Polynomial, 3> ep;
  for (size_t i = 0; i < 3; ++i) ep[i] = sp.p[i] - reference.p(static_cast<Eigen::Index>(i));
  std::array<Polynomial, 9> eR;
  for (size_t c = 0; c < 3; ++c) {
    for (size_t r = 0; r < 3; ++r) {
      eR[3 * c + r] = sp.R[r][c] - reference.R(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  auto quad = [n](const auto& e, const auto& Q) {
    Polynomial s(n);
    const int d = static_cast<int>(e.size());
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (Q(i, j) != 0.0) s += Q(i, j) * (e[static_cast<size_t>(i)] * e[static_cast<size_t>(j)]);
      }
    }
    return s;
  };
  obj.J_p = quad(ep, Q_p);
  obj.J_R = quad(eR, Q_R);
  obj.J = obj.J_p + obj.J_R;
  return obj;
}

/// Admissible screw axes: |omega|^2 (|omega|^2 - 1) = 0 and |v| <= v_limit,
/// optionally with the redundant ball 1 - |omega|^2 >= 0.
struct FeasibleSet {
  bool planar = true;
  double v_limit = 1.0;
  bool redundant_ball = true;
  Polynomial g_eq;
  std::vector<Polynomial> g_ineq;

  int num_control_vars() const { return planar ? 3 : 6; }

  static FeasibleSet make(bool planar, double v_limit, bool redundant_ball = true) {
    if (!(v_limit > 0.0)) throw std::invalid_argument("FeasibleSet: v_limit must be > 0");
    FeasibleSet G;
    G.planar = planar;
    G.v_limit = v_limit;
    G.redundant_ball = redundant_ball;
    const int n = G.num_control_vars();
    Polynomial ww(n), vv(n);
    if (planar) {
      ww = Polynomial::variable(n, 0).pow(2);
      vv = Polynomial::variable(n, 1).pow(2) + Polynomial::variable(n, 2).pow(2);
    } else {
      for (int i = 0; i < 3; ++i) {
        ww += Polynomial::variable(n, i).pow(2);
        vv += Polynomial::variable(n, 3 + i).pow(2);
      }
    }
    G.g_eq = ww * (ww - 1.0);
    G.g_ineq.push_back(v_limit * v_limit - vv);
    if (redundant_ball) G.g_ineq.push_back(1.0 - ww);
    return G;
  }

  bool contains(const ScrewControl& u, double tol = 1e-8) const {
    const double w2 = u.omega_hat.squaredNorm();
    return std::abs(w2 * (w2 - 1.0)) <= tol && u.v_hat.norm() <= v_limit + tol;
  }
};

/// Coefficients of each face of B seen from {b'} as polynomials in x for a
/// numeric motion (planar B uses the xy part of the pose).
inline std::vector<Polynomial> mapped_faces(const Polytope& B, const Pose& motion) {
  const int d = B.space_dim;
  std::vector<Polynomial> out;
  for (const auto& f : B.faces) {
    const Eigen::VectorXd a = f.normal;
    Eigen::VectorXd p = motion.p.head(d);
    const Eigen::MatrixXd R = motion.R.topLeftCorner(d, d);
    Polynomial t = Polynomial::constant(d, f.offset - a.dot(p));
    const Eigen::VectorXd lin = -(R.transpose() * a);
    for (int k = 0; k < d; ++k) t += lin(k) * Polynomial::variable(d, k);
    out.push_back(std::move(t));
  }
  return out;
}

/// Smallest face value of B over boundary samples of A carried by `motion`.
inline double audit_margin(const SemialgebraicSet& A, const Polytope& B, const Pose& motion,
                           int samples = 200) {
  const int d = B.space_dim;
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& xa : sample_boundary(A, samples)) {
    Eigen::Vector3d x3 = Eigen::Vector3d::Zero();
    x3.head(d) = xa;
    const Eigen::Vector3d xb = motion.apply(x3);
    margin = std::min(margin, B.min_value(xb.head(d)));
  }
  return margin;
}

struct MomentProgram {
  int ell = 3;
  int k = 1;
  int num_vars = 3;
  int min_order = 3;  // l_0
  MonomialIndex tms;  // [u]_{2l}
  sdp::ConicProblem problem;

  int moment_side = 0;
  std::vector<int> localizing_sides;  // per g_ineq
  int eq_side = 0;                    // g_eq localizing side
  int eq_rows = 0;                    // independent moment equalities (incl. y_0 = 1)
  bool facially_reduced = false;
  std::vector<int> reduced_sides;     // PSD sides actually passed to the solver

  struct GramBlock {
    int face = 0;
    int mult = 0;  // 0 = sigma_0, j + 1 = multiplier of f_j
    int side = 1;
    int z_offset = 0;
  };
  std::vector<GramBlock> grams;
  int num_faces = 0;

  // Inputs kept for extraction, repair and audit.
  TrackingObjective objective;
  FeasibleSet feasible;
  SemialgebraicSet robot;
  RegionCoefficients region;

  int tms_dim() const { return tms.size(); }
  int num_z() const { return problem.num_constraints(); }
};

inline int min_relaxation_order(const TrackingObjective& obj, const FeasibleSet& G,
                                const RegionCoefficients& rc) {
  int d = std::max({rc.faces.empty() ? 0 : rc.max_degree(), G.g_eq.degree(), obj.J.degree()});
  for (const auto& g : G.g_ineq) d = std::max(d, g.degree());
  return (d + 1) / 2;
}

namespace detail {

/// Normal form of a planar monomial modulo w^3 = w (w is variable 0).
inline Monomial reduce_w(const Monomial& m) {
  const int a = m[0];
  if (a < 3) return m;
  std::vector<int> e(m.exponents().begin(), m.exponents().end());
  e[0] = a % 2 == 1 ? 1 : 2;
  return Monomial(std::move(e));
}

/// Upper triangle of L_y(g b b') over an explicit basis, as linear forms in
/// the moments.
inline std::vector<LinearEntry> pattern_over(const MonomialIndex& tms, const Polynomial& g,
                                             const std::vector<Monomial>& basis) {
  std::vector<LinearEntry> out;
  const int n = static_cast<int>(basis.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      LinearEntry e{i, j, {}};
      const Monomial ab = basis[static_cast<size_t>(i)] * basis[static_cast<size_t>(j)];
      for (const auto& [m, c] : g.terms()) e.terms.emplace_back(tms.at(m * ab), c);
      out.push_back(std::move(e));
    }
  }
  return out;
}

/// Linear equation sum_k coef_k y_k = rhs over the moments.
struct MomentEquation {
  std::map<int, double> coef;
  double rhs = 0.0;
};

/// Keeps a linearly independent subset of the equations (column-pivoted QR
/// on the transposed system, so the selection is deterministic).
inline std::vector<MomentEquation> independent_equations(const std::vector<MomentEquation>& eqs, int N) {
  if (eqs.empty()) return {};
  Eigen::MatrixXd Et = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(eqs.size()));
  for (size_t r = 0; r < eqs.size(); ++r) {
    for (const auto& [k, c] : eqs[r].coef) Et(k, static_cast<Eigen::Index>(r)) = c;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Et);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  std::vector<int> keep;
  for (int i = 0; i < rank; ++i) keep.push_back(static_cast<int>(qr.colsPermutation().indices()(i)));
  std::sort(keep.begin(), keep.end());
  std::vector<MomentEquation> out;
  for (int r : keep) out.push_back(eqs[static_cast<size_t>(r)]);
  return out;
}

}  // namespace detail

/// Builds the relaxation of order l with Qmod order k for the face couplings.
///
/// In the planar case every pseudo-moment sequence satisfying L_geq[y] = 0
/// and M_l[y] >= 0 has (w^3 - w) m in the kernel of M_l and of every
/// localizing matrix, and w m in the kernel of the ball localizing matrix. Those kernels are removed exactly:
/// the matrices are written over the surviving monomials and the kernel
/// conditions become linear equations. This keeps the conic program strictly
/// feasible, which the interior-point solver needs.
inline MomentProgram assemble(const TrackingObjective& obj, const FeasibleSet& G, const SemialgebraicSet& A,
                              const RegionCoefficients& rc, int k, int ell, bool facial_reduction = true) {
  const int n = G.num_control_vars();
  if (obj.J.num_vars() != n) throw RingMismatch("assemble: objective and feasible set rings differ");
  if (!rc.faces.empty() && rc.num_control_vars != n) throw RingMismatch("assemble: region coefficients ring");
  if (!rc.faces.empty() && rc.space_dim != A.space_dim) {
    throw std::invalid_argument("assemble: region and robot dimensions differ");
  }
  MomentProgram mp;
  mp.min_order = min_relaxation_order(obj, G, rc);
  if (ell < mp.min_order) throw DegreeOverflow("assemble: relaxation order below l_0");
  if (k < 1 || 2 * k < std::max(A.max_degree(), 1)) throw DegreeOverflow("assemble: 2k below deg f_A");
  mp.ell = ell;
  mp.k = k;
  mp.num_vars = n;
  mp.tms = MonomialIndex(n, 2 * ell);
  mp.num_faces = static_cast<int>(rc.faces.size());
  mp.objective = obj;
  mp.feasible = G;
  mp.robot = A;
  mp.region = rc;
  const bool reduce = facial_reduction && G.planar;
  mp.facially_reduced = reduce;

  sdp::ProblemBuilder pb;
  const int N = mp.tms.size();
  for (int r = 0; r < N; ++r) pb.add_row(-obj.J.coefficient(mp.tms[r]));

  std::vector<detail::MomentEquation> eqs;
  {
    detail::MomentEquation e0;
    e0.coef[0] = 1.0;
    e0.rhs = 1.0;
    eqs.push_back(e0);
  }

  // g >= 0 as L_y(g b b') >= 0 over the localizing basis. `drop` selects
  // basis monomials that lie in the known kernel; `image` gives the kernel
  // vector e_m - e_image(m) (or e_m alone when image(m) is empty).
  auto add_localizing = [&](const Polynomial& g, auto drop, auto image) {
    const int lg = localizing_order(ell, g.degree());
    const MonomialIndex full(n, lg);
    std::vector<Monomial> kept;
    for (const auto& m : full.basis()) {
      if (!drop(m)) {
        kept.push_back(m);
        continue;
      }
      const std::optional<Monomial> im = image(m);
      for (const auto& a : full.basis()) {
        detail::MomentEquation e;
        for (const auto& [gm, c] : g.terms()) {
          e.coef[mp.tms.at(gm * a * m)] += c;
          if (im) e.coef[mp.tms.at(gm * a * *im)] -= c;
        }
        std::erase_if(e.coef, [](const auto& kv) { return kv.second == 0.0; });
        if (!e.coef.empty()) eqs.push_back(std::move(e));
      }
    }
    const int blk = pb.add_psd_block(static_cast<int>(kept.size()));
    for (const auto& e : detail::pattern_over(mp.tms, g, kept)) {
      for (const auto& [idx, c] : e.terms) pb.add_psd(idx, blk, e.row, e.col, -c);
    }
    return std::pair<int, int>(full.size(), static_cast<int>(kept.size()));
  };
  auto no_image = [](const Monomial&) { return std::optional<Monomial>(); };

  auto drop_w3 = [&](const Monomial& m) { return reduce && m[0] >= 3; };
  auto image_w = [](const Monomial& m) { return std::optional<Monomial>(detail::reduce_w(m)); };
  {
    const auto [full, kept] = add_localizing(Polynomial::constant(n, 1.0), drop_w3, image_w);
    mp.moment_side = full;
    mp.reduced_sides.push_back(kept);
  }
  for (size_t gi = 0; gi < G.g_ineq.size(); ++gi) {
    const bool is_ball = G.redundant_ball && gi == 1;
    std::pair<int, int> sides;
    if (reduce && is_ball) {
      sides = add_localizing(G.g_ineq[gi], [](const Monomial& m) { return m[0] >= 1; }, no_image);
    } else {
      sides = add_localizing(G.g_ineq[gi], drop_w3, image_w);
    }
    mp.localizing_sides.push_back(sides.first);
    mp.reduced_sides.push_back(sides.second);
  }
  // L_geq[y] = 0.
  {
    const int lg = localizing_order(ell, G.g_eq.degree());
    const MonomialIndex basis(n, lg);
    mp.eq_side = basis.size();
    for (int i = 0; i < basis.size(); ++i) {
      for (int j = i; j < basis.size(); ++j) {
        detail::MomentEquation e;
        for (const auto& [mono, c] : G.g_eq.terms()) e.coef[mp.tms.at(mono * basis[i] * basis[j])] += c;
        eqs.push_back(std::move(e));
      }
    }
  }
  for (const auto& e : detail::independent_equations(eqs, N)) {
    const int f = pb.add_free();
    if (e.rhs != 0.0) pb.cost_free(f, e.rhs);
    for (const auto& [idx, c] : e.coef) pb.add_free(idx, f, c);
    ++mp.eq_rows;
  }

  // Face couplings.
  if (!rc.faces.empty()) {
    const QmodLayout L = qmod_layout(A, k, 1);
    const auto terms = gram_terms(A, L);
    const int d = A.space_dim;
    for (int face = 0; face < mp.num_faces; ++face) {
      std::vector<int> z_off;
      for (int m = 0; m < L.num_multipliers(); ++m) {
        const int side = L.side[static_cast<size_t>(m)];
        const int off = pb.num_rows();
        for (int e = 0; e < sdp::svec_size(side); ++e) pb.add_row(0.0);
        z_off.push_back(off);
        mp.grams.push_back({face, m, side, off});
        if (side == 1) {
          const int v = pb.add_nonneg();
          pb.add_nonneg(off, v, -1.0);
        } else {
          const int blk = pb.add_psd_block(side);
          int t = 0;
          for (int i = 0; i < side; ++i)
            for (int j = i; j < side; ++j) pb.add_psd(off + t++, blk, i, j, -1.0);
        }
      }
      auto gram_z = [&](const GramTerm& t) {
        const int side = L.side[static_cast<size_t>(t.mult)];
        // Row-major upper-triangle position of (i, j).
        const int pos = t.i * side - t.i * (t.i - 1) / 2 + (t.j - t.i);
        return z_off[static_cast<size_t>(t.mult)] + pos;
      };
      for (int beta = 0; beta < L.rows.size(); ++beta) {
        const Monomial& mb = L.rows[beta];
        const Polynomial* cb = nullptr;
        if (mb.degree() == 0) {
          cb = &rc.faces[static_cast<size_t>(face)][0];
        } else if (mb.degree() == 1) {
          for (int v = 0; v < d; ++v) {
            if (mb[v] == 1) cb = &rc.faces[static_cast<size_t>(face)][static_cast<size_t>(v + 1)];
          }
        }
        bool any = false;
        const int f = pb.add_free();
        if (cb != nullptr) {
          for (const auto& [mono, c] : cb->terms()) {
            pb.add_free(mp.tms.at(mono), f, c);
            any = true;
          }
        }
        for (const auto& t : terms) {
          if (t.row != beta) continue;
          pb.add_free(gram_z(t), f, -t.coef);
          any = true;
        }
        if (!any) throw std::logic_error("assemble: empty coupling equation");
      }
    }
  }
  mp.problem = pb.build();
  return mp;
}

enum class StepStatus { ExactRank1, RepairedFeasible, Infeasible, SolverError };

inline const char* to_string(StepStatus s) {
  switch (s) {
    case StepStatus::ExactRank1: return "ExactRank1";
    case StepStatus::RepairedFeasible: return "RepairedFeasible";
    case StepStatus::Infeasible: return "Infeasible";
    case StepStatus::SolverError: return "SolverError";
  }
  return "?";
}

struct ControlResult {
  StepStatus status = StepStatus::SolverError;
  std::optional<ScrewControl> control;
  double lower_bound = std::numeric_limits<double>::quiet_NaN();  // J_{k,l}
  std::optional<double> achieved;                                  // J(u*)
  double achieved_p = std::numeric_limits<double>::quiet_NaN();
  double achieved_R = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<int, int>> rank_sequence;  // (t, rank M_t[y*])
  int flat_order = -1;  // smallest t with rank M_t = rank M_{t+1} = 1
  Eigen::VectorXd moments;
  double audit_margin = std::numeric_limits<double>::quiet_NaN();
  double repair_scale = std::numeric_limits<double>::quiet_NaN();
  sdp::SolveStatus solver_status = sdp::SolveStatus::NumericalError;
  int iterations = 0;
  double solve_seconds = 0.0;
  double total_seconds = 0.0;

  bool safe() const { return status == StepStatus::ExactRank1 || status == StepStatus::RepairedFeasible; }
};

struct StepOptions {
  double theta_step = 0.2;
  double rank_tol = 1e-6;  // singular values below rank_tol * sigma_max count as zero
  int bisection_iterations = 20;
  int audit_samples = 200;
  int fallback_directions = 16;  // sampled repair directions; 0 disables
  double audit_tol = 1e-6;
  sdp::SolverOptions solver;
  CertifyOptions certify;
};

inline int numerical_rank(const Eigen::MatrixXd& M, double rel_tol) {
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) >= rel_tol * sv(0)) ++r;
  }
  return r;
}

/// Nearest valid axis: |omega| > 0.5 becomes unit, otherwise zero (ties go
/// to zero); v is clipped to the ball of radius v_limit.
inline ScrewControl normalize_control(const Eigen::VectorXd& u, const FeasibleSet& G) {
  ScrewControl c = ScrewControl::from_vector(u);
  const double wn = c.omega_hat.norm();
  c.omega_hat = wn > 0.5 ? Eigen::Vector3d(c.omega_hat / wn) : Eigen::Vector3d::Zero();
  const double vn = c.v_hat.norm();
  if (vn > G.v_limit) c.v_hat *= G.v_limit / vn;
  return c;
}

namespace detail {

/// Planar controls (w, E[v | w]) for each w in {-1, 0, 1} with mass above
/// 1e-3, most probable first. The masses and conditional means are Riesz
/// values of the Lagrange indicators of the three points, so they are exact
/// for any measure supported on the feasible set.
inline std::vector<ScrewControl> conditional_controls(const TruncatedMomentSequence& y, const FeasibleSet& G) {
  const int n = 3;
  const Polynomial w = Polynomial::variable(n, 0);
  const Polynomial one = Polynomial::constant(n, 1.0);
  const std::array<std::pair<double, Polynomial>, 3> ind{{
      {-1.0, 0.5 * (w * w - w)},
      {0.0, one - w * w},
      {1.0, 0.5 * (w * w + w)},
  }};
  std::vector<std::pair<double, ScrewControl>> out;
  for (const auto& [wv, l] : ind) {
    const double mass = riesz(y, l);
    if (!(mass > 1e-3)) continue;
    Eigen::VectorXd u(n);
    u(0) = wv;
    for (int i = 1; i < n; ++i) u(i) = riesz(y, l * Polynomial::variable(n, i)) / mass;
    out.emplace_back(mass, normalize_control(u, G));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<ScrewControl> res;
  for (const auto& [m, c] : out) res.push_back(c);
  return res;
}

/// Certifies A moved by u inside every face of B. A failed boundary audit
/// already rules the motion out, so it is checked first.
inline bool motion_certified(const MomentProgram& mp, const Polytope& B, const ScrewControl& u,
                             const StepOptions& opt) {
  const Pose motion = exp_map(u, opt.theta_step);
  if (audit_margin(mp.robot, B, motion, opt.audit_samples) < -opt.audit_tol) return false;
  for (const auto& t : mapped_faces(B, motion)) {
    if (!certify_containment(t, mp.robot, mp.k, opt.certify).certified()) return false;
  }
  return true;
}

}  // namespace detail

/// Solves the relaxation, tests flatness of the moment matrix and returns a
/// control that is either the extracted rank-one minimizer or the repaired
/// (normalized and certified-scaled) fallback. `B` is the free region the
/// coefficients were built from; it is used for certification and audit.
inline ControlResult solve_step(const MomentProgram& mp, const Polytope& B, const StepOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  ControlResult res;
  const sdp::ConicSolution sol = sdp::solve(mp.problem, opt.solver);
  res.solver_status = sol.status;
  res.iterations = sol.iterations;
  res.solve_seconds = sol.solve_seconds;
  auto finish = [&]() {
    res.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  };
  const bool usable = sol.status == sdp::SolveStatus::Optimal ||
                      ((sol.status == sdp::SolveStatus::MaxIter || sol.status == sdp::SolveStatus::NumericalError) &&
                       sol.y.allFinite() && sol.primal_residual < 1e-5 && sol.dual_residual < 1e-5 && sol.gap < 1e-5);
  if (sol.status == sdp::SolveStatus::Infeasible) {
    res.status = StepStatus::Infeasible;
    return finish();
  }
  if (!usable) {
    res.status = StepStatus::SolverError;
    return finish();
  }

  const int N = mp.tms_dim();
  res.moments = sol.y.head(N);
  const TruncatedMomentSequence y(mp.num_vars, 2 * mp.ell, res.moments);
  res.lower_bound = riesz(y, mp.objective.J);

  std::vector<int> ranks;
  for (int t = 1; t <= mp.ell; ++t) {
    const int r = numerical_rank(moment_matrix(y, t), opt.rank_tol);
    res.rank_sequence.emplace_back(t, r);
    ranks.push_back(r);
  }
  for (int t = 1; t < mp.ell; ++t) {
    if (ranks[static_cast<size_t>(t - 1)] == 1 && ranks[static_cast<size_t>(t)] == 1) {
      res.flat_order = t;
      break;
    }
  }

  auto set_control = [&](const ScrewControl& c) {
    const Eigen::VectorXd u = c.to_vector();
    res.control = c;
    res.achieved = mp.objective.J.evaluate(u);
    res.achieved_p = mp.objective.J_p.evaluate(u);
    res.achieved_R = mp.objective.J_R.evaluate(u);
    res.audit_margin = audit_margin(mp.robot, B, exp_map(c, opt.theta_step), opt.audit_samples);
  };

  Eigen::VectorXd u_raw(mp.num_vars);
  for (int i = 0; i < mp.num_vars; ++i) u_raw(i) = y.value(Monomial::variable(mp.num_vars, i));
  const ScrewControl u_norm = normalize_control(u_raw, mp.feasible);

  if (ranks.back() == 1) {
    set_control(u_norm);
    if (res.audit_margin >= -opt.audit_tol) {
      res.status = StepStatus::ExactRank1;
      res.repair_scale = 1.0;
      return finish();
    }
  }

  // Repair: for each candidate axis, the largest s in [0, 1] such that
  // (omega, s v) is certified. Candidates are the snapped control, then (in
  // the planar case) the conditional mean of v given each value of w, in
  // order of decreasing probability mass under y*, then pure translation.
  std::vector<ScrewControl> candidates{u_norm};
  if (mp.feasible.planar) {
    for (const auto& c : detail::conditional_controls(y, mp.feasible)) {
      bool dup = false;
      for (const auto& d : candidates) dup = dup || (d.to_vector() - c.to_vector()).norm() < 1e-9;
      if (!dup) candidates.push_back(c);
    }
  }
  // Last resort: pure translation along the mean v (s = 0 is the null motion).
  bool have_translation = false;
  for (const auto& c : candidates) have_translation = have_translation || c.omega_hat.norm() == 0.0;
  if (!have_translation) {
    ScrewControl c = u_norm;
    c.omega_hat.setZero();
    candidates.push_back(c);
  }
  std::optional<ScrewControl> null_motion;
  for (const auto& cand : candidates) {
    auto scaled = [&](double s) {
      ScrewControl c = cand;
      c.v_hat *= s;
      return c;
    };
    double s_best = -1.0;
    if (detail::motion_certified(mp, B, scaled(1.0), opt)) {
      s_best = 1.0;
    } else if (detail::motion_certified(mp, B, scaled(0.0), opt)) {
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < opt.bisection_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::motion_certified(mp, B, scaled(mid), opt)) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      s_best = lo;
    }
    if (s_best < 0.0) continue;
    const ScrewControl c = scaled(s_best);
    if (c.omega_hat.norm() == 0.0 && c.v_hat.norm() < 1e-9) {
      null_motion = c;
      continue;
    }
    set_control(c);
    res.repair_scale = s_best;
    res.status = StepStatus::RepairedFeasible;
    return finish();
  }

  // Sampled fallback: a fixed set of controls in increasing cost order, first
  // certified one that beats the null motion.
  if (mp.feasible.planar && opt.fallback_directions > 0) {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(mp.num_vars);
    const double j0 = mp.objective.J.evaluate(zero);
    std::vector<std::pair<double, ScrewControl>> pool;
    for (double w : {-1.0, 0.0, 1.0}) {
      for (int d = 0; d < opt.fallback_directions; ++d) {
        const double a = 2.0 * std::numbers::pi * d / opt.fallback_directions;
        for (double m : {1.0, 0.5, 0.25}) {
          const double r = m * mp.feasible.v_limit;
          const ScrewControl c = ScrewControl::planar_control(w, r * std::cos(a), r * std::sin(a));
          const double j = mp.objective.J.evaluate(c.to_vector());
          if (j < j0) pool.emplace_back(j, c);
        }
      }
    }
    std::stable_sort(pool.begin(), pool.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [j, c] : pool) {
      if (detail::motion_certified(mp, B, c, opt)) {
        set_control(c);
        res.repair_scale = 0.0;
        res.status = StepStatus::RepairedFeasible;
        return finish();
      }
    }
  }
  if (null_motion) {
    set_control(*null_motion);
    res.repair_scale = 0.0;
    res.status = StepStatus::RepairedFeasible;
    return finish();
  }
  res.control.reset();
  res.achieved.reset();
  res.status = StepStatus::Infeasible;
  return finish();
}

/// J_{k,l} for each l in `ells` on one instance.
inline std::vector<std::pair<int, double>> hierarchy_sweep(const TrackingObjective& obj, const FeasibleSet& G,
                                                           const SemialgebraicSet& A, const RegionCoefficients& rc,
                                                           int k, const std::vector<int>& ells,
                                                           const sdp::SolverOptions& solver = {}) {
  std::vector<std::pair<int, double>> out;
  for (int ell : ells) {
    const MomentProgram mp = assemble(obj, G, A, rc, k, ell);
    const sdp::ConicSolution sol = sdp::solve(mp.problem, solver);
    if (sol.status != sdp::SolveStatus::Optimal) {
      throw std::runtime_error(std::string("hierarchy_sweep: solver returned ") + sdp::to_string(sol.status));
    }
    const TruncatedMomentSequence y(mp.num_vars, 2 * ell, sol.y.head(mp.tms_dim()));
    out.emplace_back(ell, riesz(y, obj.J));
  }
  return out;
}

/// Achieved cost of the extracted (or repaired) control for each k in `ks`.
inline std::vector<std::pair<int, ControlResult>> order_sweep(const TrackingObjective& obj, const FeasibleSet& G,
                                                              const SemialgebraicSet& A, const Polytope& B,
                                                              const RegionCoefficients& rc, const std::vector<int>& ks,
                                                              int ell, const StepOptions& opt = {}) {
  std::vector<std::pair<int, ControlResult>> out;
  for (int k : ks) out.emplace_back(k, solve_step(assemble(obj, G, A, rc, k, ell), B, opt));
  return out;
}

inline nlohmann::json step_json(const MomentProgram& mp, const ControlResult& r) {
  nlohmann::json j;
  j["ell"] = mp.ell;
  j["k"] = mp.k;
  j["tms_dim"] = mp.tms_dim();
  j["moment_side"] = mp.moment_side;
  j["localizing_sides"] = mp.localizing_sides;
  j["eq_side"] = mp.eq_side;
  j["faces"] = mp.num_faces;
  j["constraints"] = mp.problem.num_constraints();
  j["variables"] = mp.problem.num_variables();
  j["status"] = to_string(r.status);
  j["solver_status"] = sdp::to_string(r.solver_status);
  j["iterations"] = r.iterations;
  j["lower_bound"] = r.lower_bound;
  j["achieved"] = r.achieved ? nlohmann::json(*r.achieved) : nlohmann::json(nullptr);
  nlohmann::json ranks = nlohmann::json::array();
  for (const auto& [t, rk] : r.rank_sequence) ranks.push_back({t, rk});
  j["rank_sequence"] = ranks;
  j["flat_order"] = r.flat_order;
  if (r.control) {
    const Eigen::VectorXd u = r.control->to_vector();
    j["u"] = std::vector<double>(u.data(), u.data() + u.size());
  } else {
    j["u"] = nullptr;
  }
  j["audit_margin"] = r.audit_margin;
  j["repair_scale"] = r.repair_scale;
  j["solve_ms"] = 1e3 * r.solve_seconds;
  return j;
}

}  // namespace screwcert
