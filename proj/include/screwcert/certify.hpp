#pragma once

// Quadratic-module containment certificates: target = sigma_0 + sum_j
// sigma_j f_j with SOS multipliers, found by SDP, plus a sampling falsifier.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "screwcert/geom.hpp"
#include "screwcert/polyalg.hpp"
#include "screwcert/sdp.hpp"

namespace screwcert {

/// Gram bookkeeping for Qmod_{2k}[A] restricted to the degrees a target of
/// degree `target_degree` can reach.
///
/// Multiplier m = 0 is sigma_0 over [x]_{d0}; multiplier m = j + 1 is
/// sigma_j over [x]_{k_j} with k_j = floor((2k - deg f_j) / 2). Since
/// sigma_0 = target - sum_j sigma_j f_j has degree at most `top`, the basis
/// of sigma_0 is cut to [x]_{floor(top/2)} without loss.
struct QmodLayout {
  int num_vars = 0;
  int k = 1;
  int top = 0;
  std::vector<int> half_degree;  // per multiplier, index 0 is sigma_0
  std::vector<int> side;         // Gram side per multiplier
  MonomialIndex rows;            // [x]_top

  int num_multipliers() const { return static_cast<int>(half_degree.size()); }
  bool scalar(int m) const { return side[static_cast<size_t>(m)] == 1; }
};

/// Smallest admissible order: 2k >= max deg f_j, and k >= 1.
inline int default_order(const SemialgebraicSet& A) {
  return std::max(1, (A.max_degree() + 1) / 2);
}

inline QmodLayout qmod_layout(const SemialgebraicSet& A, int k, int target_degree) {
  if (k < 1) throw std::invalid_argument("qmod_layout: order k must be >= 1");
  if (2 * k < std::max(target_degree, A.max_degree())) {
    throw DegreeOverflow("qmod_layout: 2k below the degree of the target or of A");
  }
  QmodLayout L;
  L.num_vars = A.space_dim;
  L.k = k;
  L.top = target_degree;
  std::vector<int> kj;
  for (const auto& f : A.polys) {
    const int h = (2 * k - f.degree()) / 2;
    kj.push_back(h);
    L.top = std::max(L.top, f.degree() + 2 * h);
  }
  L.half_degree.push_back(std::min(k, L.top / 2));
  for (int h : kj) L.half_degree.push_back(h);
  for (int h : L.half_degree) L.side.push_back(basis_size(L.num_vars, h));
  L.rows = MonomialIndex(L.num_vars, L.top);
  return L;
}

/// Contribution coef * G_m[i][j] (i <= j, off-diagonal pairs counted once
/// with the factor 2 already applied) to coefficient `row` of the Qmod sum.
struct GramTerm {
  int mult = 0;
  int i = 0;
  int j = 0;
  int row = 0;
  double coef = 0.0;
};

inline std::vector<GramTerm> gram_terms(const SemialgebraicSet& A, const QmodLayout& L) {
  std::vector<GramTerm> out;
  for (int m = 0; m < L.num_multipliers(); ++m) {
    const MonomialIndex basis(L.num_vars, L.half_degree[static_cast<size_t>(m)]);
    const Polynomial f = m == 0 ? Polynomial::constant(L.num_vars, 1.0) : A.polys[static_cast<size_t>(m - 1)];
    for (int i = 0; i < basis.size(); ++i) {
      for (int j = i; j < basis.size(); ++j) {
        const Monomial ab = basis[i] * basis[j];
        const double mult = i == j ? 1.0 : 2.0;
        for (const auto& [mono, c] : f.terms()) out.push_back({m, i, j, L.rows.at(mono * ab), mult * c});
      }
    }
  }
  return out;
}

enum class CertifyStatus { Certified, NoCertificate, SolverError };

inline const char* to_string(CertifyStatus s) {
  switch (s) {
    case CertifyStatus::Certified: return "Certified";
    case CertifyStatus::NoCertificate: return "NoCertificate";
    case CertifyStatus::SolverError: return "SolverError";
  }
  return "?";
}

struct QmodCertificate {
  int k = 1;
  int num_vars = 2;
  int gram0_half_degree = 0;
  Eigen::MatrixXd gram0;
  std::vector<int> half_degrees;  // per generator f_j
  std::vector<Eigen::MatrixXd> grams;
  double residual_norm = 0.0;
  double min_eigenvalue = 0.0;

  /// sigma_0 + sum_j sigma_j f_j.
  Polynomial reassemble(const SemialgebraicSet& A) const {
    auto sos = [&](const Eigen::MatrixXd& G, int h) {
      const MonomialIndex basis(num_vars, h);
      Polynomial s(num_vars);
      for (int i = 0; i < basis.size(); ++i) {
        for (int j = 0; j < basis.size(); ++j) {
          if (G(i, j) != 0.0) s += Polynomial::monomial(basis[i] * basis[j], G(i, j));
        }
      }
      return s;
    };
    Polynomial p = sos(gram0, gram0_half_degree);
    for (size_t j = 0; j < grams.size(); ++j) p += sos(grams[j], half_degrees[j]) * A.polys[j];
    return p;
  }

  nlohmann::json to_json() const {
    auto mat = [](const Eigen::MatrixXd& M) {
      nlohmann::json rows = nlohmann::json::array();
      for (int i = 0; i < M.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
        rows.push_back(r);
      }
      return rows;
    };
    nlohmann::json j;
    j["k"] = k;
    j["num_vars"] = num_vars;
    j["residual_norm"] = residual_norm;
    j["min_eigenvalue"] = min_eigenvalue;
    j["sigma0"] = {{"half_degree", gram0_half_degree}, {"gram", mat(gram0)}};
    nlohmann::json mults = nlohmann::json::array();
    for (size_t i = 0; i < grams.size(); ++i) {
      mults.push_back({{"generator", i}, {"half_degree", half_degrees[i]}, {"gram", mat(grams[i])}});
    }
    j["multipliers"] = mults;
    return j;
  }
};

struct CertifyResult {
  CertifyStatus status = CertifyStatus::SolverError;
  std::optional<QmodCertificate> certificate;
  /// Largest gamma with target - gamma in the truncated module (NaN if unknown).
  double gamma = std::numeric_limits<double>::quiet_NaN();
  sdp::SolveStatus solver_status = sdp::SolveStatus::NumericalError;
  int iterations = 0;

  bool certified() const { return status == CertifyStatus::Certified; }
};

struct CertifyOptions {
  double residual_tol = 1e-6;
  double eig_tol = 1e-8;
  /// gamma* below -gamma_tol means no certificate at this order.
  double gamma_tol = 1e-7;
  sdp::SolverOptions solver;
};

/// Projects a symmetric matrix onto the PSD cone.
inline Eigen::MatrixXd psd_projection(const Eigen::MatrixXd& G) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Searches for target in Qmod_{2k}[A] by maximizing gamma subject to
/// target - gamma = sigma_0 + sum_j sigma_j f_j, matched over every monomial.
/// A certificate is returned when gamma* >= -gamma_tol and the shifted,
/// PSD-projected Gram matrices reproduce target within residual_tol.
inline CertifyResult certify_containment(const Polynomial& target, const SemialgebraicSet& A, int k,
                                         const CertifyOptions& opt = {}) {
  if (target.num_vars() != A.space_dim) throw RingMismatch("certify_containment: ring mismatch");
  const QmodLayout L = qmod_layout(A, k, target.degree());
  sdp::ProblemBuilder pb;
  for (int r = 0; r < L.rows.size(); ++r) pb.add_row(target.coefficient(L.rows[r]));
  std::vector<int> handle;
  for (int m = 0; m < L.num_multipliers(); ++m) {
    handle.push_back(L.scalar(m) ? pb.add_nonneg() : pb.add_psd_block(L.side[static_cast<size_t>(m)]));
  }
  for (const auto& t : gram_terms(A, L)) {
    const int h = handle[static_cast<size_t>(t.mult)];
    if (L.scalar(t.mult)) {
      pb.add_nonneg(t.row, h, t.coef);
    } else {
      pb.add_psd(t.row, h, t.i, t.j, t.i == t.j ? t.coef : 0.5 * t.coef);
    }
  }
  const int gamma = pb.add_free();
  pb.add_free(0, gamma, 1.0);
  pb.cost_free(gamma, -1.0);

  CertifyResult res;
  sdp::ConicProblem prob = pb.build();
  if (!prob.drop_empty_rows()) {
    res.status = CertifyStatus::NoCertificate;
    res.solver_status = sdp::SolveStatus::Infeasible;
    return res;
  }
  const sdp::ConicSolution sol = sdp::solve(prob, opt.solver);
  res.solver_status = sol.status;
  res.iterations = sol.iterations;
  if (sol.status == sdp::SolveStatus::Infeasible) {
    res.status = CertifyStatus::NoCertificate;
    return res;
  }
  if (sol.status == sdp::SolveStatus::Unbounded) {
    // gamma unbounded above: -1 is in the module, so A is empty.
    res.status = CertifyStatus::NoCertificate;
    res.gamma = std::numeric_limits<double>::infinity();
    return res;
  }
  // A run that stopped short of the tolerances still hands back its best
  // iterate; the verification pass below decides whether it is usable.
  if (!sol.x.allFinite()) {
    res.status = CertifyStatus::SolverError;
    return res;
  }
  const sdp::ConeSpec& K = prob.cones;
  const double g = sol.x(K.free_offset() + gamma);
  res.gamma = g;
  if (g < -opt.gamma_tol) {
    res.status = sol.status == sdp::SolveStatus::Optimal ? CertifyStatus::NoCertificate
                                                         : CertifyStatus::SolverError;
    return res;
  }

  QmodCertificate cert;
  cert.k = k;
  cert.num_vars = L.num_vars;
  int psd_k = 0;
  auto gram_of = [&](int m) {
    Eigen::MatrixXd G;
    if (L.scalar(m)) {
      G = Eigen::MatrixXd::Constant(1, 1, sol.x(K.nonneg_offset() + handle[static_cast<size_t>(m)]));
    } else {
      G = sdp::block_matrix(prob, sol.x, psd_k++);
    }
    return G;
  };
  // PSD blocks are numbered in creation order, which is multiplier order.
  std::vector<Eigen::MatrixXd> raw;
  for (int m = 0; m < L.num_multipliers(); ++m) raw.push_back(gram_of(m));
  raw[0](0, 0) += g;
  double min_eig = std::numeric_limits<double>::infinity();
  for (auto& G : raw) {
    G = psd_projection(G);
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff());
  }
  cert.gram0_half_degree = L.half_degree[0];
  cert.gram0 = raw[0];
  for (int m = 1; m < L.num_multipliers(); ++m) {
    cert.half_degrees.push_back(L.half_degree[static_cast<size_t>(m)]);
    cert.grams.push_back(raw[static_cast<size_t>(m)]);
  }
  cert.min_eigenvalue = min_eig;
  // Residual over the full [x]_{2k} basis.
  const Polynomial diff = cert.reassemble(A) - target;
  double resid = 0.0;
  for (const auto& [mono, c] : diff.terms()) resid = std::max(resid, std::abs(c));
  cert.residual_norm = resid;
  if (resid <= opt.residual_tol && min_eig >= -opt.eig_tol) {
    res.status = CertifyStatus::Certified;
    res.certificate = std::move(cert);
  } else {
    res.status = sol.status == sdp::SolveStatus::Optimal && g < 0.0 ? CertifyStatus::NoCertificate
                                                                    : CertifyStatus::SolverError;
  }
  return res;
}

/// Containment of A in {x : f >= 0 for every f in `targets`}, checked at order k.
struct ContainmentReport {
  bool certified = true;
  std::vector<CertifyResult> faces;
};

inline ContainmentReport certify_all(const std::vector<Polynomial>& targets, const SemialgebraicSet& A,
                                     int k, const CertifyOptions& opt = {}) {
  ContainmentReport rep;
  for (const auto& t : targets) {
    rep.faces.push_back(certify_containment(t, A, k, opt));
    if (!rep.faces.back().certified()) rep.certified = false;
  }
  return rep;
}

namespace detail {

inline double radical_inverse(uint64_t i, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % static_cast<uint64_t>(base));
    i /= static_cast<uint64_t>(base);
    f *= inv;
  }
  return r;
}

}  // namespace detail

/// Point x in A with target(x) < -1e-9, searched by a Halton sweep of
/// A's bounding box (plus polygon vertices) and pattern-search descent from
/// the best feasible samples.
inline std::optional<Eigen::VectorXd> falsify(const Polynomial& target, const SemialgebraicSet& A,
                                              int n_samples = 10000) {
  if (!A.compact) throw std::invalid_argument("falsify: A must be compact");
  constexpr double kWitness = -1e-9;
  const int d = A.space_dim;
  const double R = A.enclosing_radius > 0.0 ? A.enclosing_radius : 1.0;
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13};

  std::vector<std::pair<double, Eigen::VectorXd>> feasible;
  auto consider = [&](const Eigen::VectorXd& x) {
    if (A.contains(x)) feasible.emplace_back(target.evaluate(x), x);
  };
  for (const auto& v : A.polygon) consider(Eigen::VectorXd(v));
  if (A.witness.size() == d) consider(A.witness);
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x(i) = -R + 2.0 * R * detail::radical_inverse(static_cast<uint64_t>(s) + 1, kPrimes[i]);
    consider(x);
  }
  if (feasible.empty()) return std::nullopt;
  std::stable_sort(feasible.begin(), feasible.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  if (feasible.front().first < kWitness) return feasible.front().second;

  const size_t starts = std::min<size_t>(5, feasible.size());
  for (size_t s = 0; s < starts; ++s) {
    Eigen::VectorXd x = feasible[s].second;
    double fx = feasible[s].first;
    double h = 0.1 * R;
    for (int it = 0; it < 2000 && h > 1e-10; ++it) {
      bool moved = false;
      for (int i = 0; i < d && !moved; ++i) {
        for (double sgn : {1.0, -1.0}) {
          Eigen::VectorXd y = x;
          y(i) += sgn * h;
          if (!A.contains(y)) continue;
          const double fy = target.evaluate(y);
          if (fy < fx) {
            x = y;
            fx = fy;
            moved = true;
            break;
          }
        }
      }
      if (fx < kWitness) return x;
      if (!moved) h *= 0.5;
    }
  }
  return std::nullopt;
}

}  // namespace screwcert
