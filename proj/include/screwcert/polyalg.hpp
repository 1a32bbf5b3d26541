#pragma once

// Sparse multivariate polynomials over a fixed number of real variables,
// graded monomial bases, truncated moment sequences, and the Riesz /
// moment / localizing constructions built on top of them.
//
// Monomial order: graded lexicographic. Monomials are compared first by total
// degree; within a degree the exponent tuple that is lexicographically larger
// comes first, so basis(2, 2) = [1, x1, x2, x1^2, x1*x2, x2^2]. Every
// coefficient vector, Gram matrix and moment matrix in the library uses this
// layout, and basis(n, d) is always a prefix of basis(n, d + 1).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace screwcert {

/// Coefficients with magnitude below this are dropped on construction.
inline constexpr double kDropTolerance = 1e-14;

class RingMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegreeOverflow : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<int> exponents) : exps_(std::move(exponents)) {
    for (int e : exps_) {
      if (e < 0) throw std::invalid_argument("Monomial: negative exponent");
    }
  }

  static Monomial one(int num_vars) {
    return Monomial(std::vector<int>(static_cast<size_t>(num_vars), 0));
  }
  static Monomial variable(int num_vars, int index) {
    std::vector<int> e(static_cast<size_t>(num_vars), 0);
    e.at(static_cast<size_t>(index)) = 1;
    return Monomial(std::move(e));
  }

  int num_vars() const { return static_cast<int>(exps_.size()); }
  int degree() const { return std::accumulate(exps_.begin(), exps_.end(), 0); }
  int operator[](int i) const { return exps_[static_cast<size_t>(i)]; }
  std::span<const int> exponents() const { return exps_; }

  Monomial operator*(const Monomial& other) const {
    if (other.num_vars() != num_vars()) {
      throw RingMismatch("Monomial product across rings");
    }
    std::vector<int> e(exps_);
    for (size_t i = 0; i < e.size(); ++i) e[i] += other.exps_[i];
    return Monomial(std::move(e));
  }

  double evaluate(std::span<const double> point) const {
    double v = 1.0;
    for (size_t i = 0; i < exps_.size(); ++i) {
      for (int k = 0; k < exps_[i]; ++k) v *= point[i];
    }
    return v;
  }

  friend bool operator==(const Monomial& a, const Monomial& b) = default;

 private:
  std::vector<int> exps_;
};

/// Strict weak order implementing the graded lexicographic convention above.
struct GradedLexLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    const int da = a.degree();
    const int db = b.degree();
    if (da != db) return da < db;
    return std::lexicographical_compare(b.exponents().begin(), b.exponents().end(),
                                        a.exponents().begin(), a.exponents().end());
  }
};

/// All monomials in `num_vars` variables of total degree <= d, graded-lex.
inline std::vector<Monomial> monomial_basis(int num_vars, int d) {
  if (num_vars < 1) throw std::invalid_argument("monomial_basis: num_vars < 1");
  if (d < 0) throw std::invalid_argument("monomial_basis: negative degree");
  std::vector<Monomial> out;
  std::vector<int> e(static_cast<size_t>(num_vars), 0);
  for (int deg = 0; deg <= d; ++deg) {
    // Enumerate exponent tuples of exact degree `deg` in descending lex order.
    auto rec = [&](auto&& self, int var, int remaining) -> void {
      if (var == num_vars - 1) {
        e[static_cast<size_t>(var)] = remaining;
        out.emplace_back(e);
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        e[static_cast<size_t>(var)] = k;
        self(self, var + 1, remaining - k);
      }
      e[static_cast<size_t>(var)] = 0;
    };
    rec(rec, 0, deg);
  }
  return out;
}

/// Number of monomials of degree <= d in n variables, C(n + d, d).
inline int basis_size(int n, int d) {
  if (d < 0) return 0;
  double r = 1.0;
  for (int i = 1; i <= d; ++i) r = r * (n + i) / i;
  return static_cast<int>(std::lround(r));
}

/// A monomial basis together with its reverse lookup table.
class MonomialIndex {
 public:
  MonomialIndex() = default;
  MonomialIndex(int num_vars, int degree)
      : num_vars_(num_vars), degree_(degree), basis_(monomial_basis(num_vars, degree)) {
    for (size_t i = 0; i < basis_.size(); ++i) lookup_.emplace(basis_[i], static_cast<int>(i));
  }

  int num_vars() const { return num_vars_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(basis_.size()); }
  const std::vector<Monomial>& basis() const { return basis_; }
  const Monomial& operator[](int i) const { return basis_[static_cast<size_t>(i)]; }

  /// Position of `m`, or -1 when m is outside the basis.
  int find(const Monomial& m) const {
    auto it = lookup_.find(m);
    return it == lookup_.end() ? -1 : it->second;
  }
  int at(const Monomial& m) const {
    const int i = find(m);
    if (i < 0) throw DegreeOverflow("monomial outside truncated basis");
    return i;
  }

 private:
  int num_vars_ = 0;
  int degree_ = -1;
  std::vector<Monomial> basis_;
  std::map<Monomial, int, GradedLexLess> lookup_;
};

class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GradedLexLess>;

  Polynomial() = default;
  explicit Polynomial(int num_vars) : num_vars_(num_vars) {}
  Polynomial(int num_vars, TermMap terms) : num_vars_(num_vars), terms_(std::move(terms)) {
    for (const auto& [m, c] : terms_) {
      if (m.num_vars() != num_vars_) throw RingMismatch("term outside polynomial ring");
    }
    prune();
  }

  static Polynomial constant(int num_vars, double c) {
    TermMap t;
    t.emplace(Monomial::one(num_vars), c);
    return Polynomial(num_vars, std::move(t));
  }
  static Polynomial variable(int num_vars, int index) {
    TermMap t;
    t.emplace(Monomial::variable(num_vars, index), 1.0);
    return Polynomial(num_vars, std::move(t));
  }
  static Polynomial monomial(const Monomial& m, double c = 1.0) {
    TermMap t;
    t.emplace(m, c);
    return Polynomial(m.num_vars(), std::move(t));
  }
  static Polynomial from_coefficients(std::span<const Monomial> basis,
                                      const Eigen::VectorXd& coef) {
    if (basis.empty()) throw std::invalid_argument("from_coefficients: empty basis");
    if (static_cast<Eigen::Index>(basis.size()) != coef.size()) {
      throw std::invalid_argument("from_coefficients: size mismatch");
    }
    TermMap t;
    for (size_t i = 0; i < basis.size(); ++i) {
      t[basis[i]] += coef(static_cast<Eigen::Index>(i));
    }
    return Polynomial(basis.front().num_vars(), std::move(t));
  }

  int num_vars() const { return num_vars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  size_t num_terms() const { return terms_.size(); }

  /// Total degree; the zero polynomial has degree 0.
  int degree() const { return terms_.empty() ? 0 : terms_.rbegin()->first.degree(); }

  double coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
  }

  /// Dense coefficient vector over `basis`; trailing zeros are stored.
  Eigen::VectorXd coefficients(const MonomialIndex& basis) const {
    check_ring(basis.num_vars());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(basis.size());
    for (const auto& [m, c] : terms_) v(basis.at(m)) = c;
    return v;
  }

  double evaluate(std::span<const double> point) const {
    if (static_cast<int>(point.size()) != num_vars_) {
      throw RingMismatch("evaluate: point dimension differs from ring");
    }
    double s = 0.0;
    for (const auto& [m, c] : terms_) s += c * m.evaluate(point);
    return s;
  }
  double evaluate(const Eigen::VectorXd& point) const {
    return evaluate(std::span<const double>(point.data(), static_cast<size_t>(point.size())));
  }

  Polynomial operator-() const {
    Polynomial r(*this);
    for (auto& [m, c] : r.terms_) c = -c;
    return r;
  }
  Polynomial& operator+=(const Polynomial& q) {
    check_ring(q.num_vars_);
    for (const auto& [m, c] : q.terms_) terms_[m] += c;
    prune();
    return *this;
  }
  Polynomial& operator-=(const Polynomial& q) { return *this += -q; }
  Polynomial& operator*=(double s) {
    for (auto& [m, c] : terms_) c *= s;
    prune();
    return *this;
  }
  Polynomial& operator+=(double s) { return *this += constant(num_vars_, s); }

  friend Polynomial operator+(Polynomial p, const Polynomial& q) { return p += q; }
  friend Polynomial operator-(Polynomial p, const Polynomial& q) { return p -= q; }
  friend Polynomial operator*(Polynomial p, double s) { return p *= s; }
  friend Polynomial operator*(double s, Polynomial p) { return p *= s; }
  friend Polynomial operator+(Polynomial p, double s) { return p += s; }
  friend Polynomial operator+(double s, Polynomial p) { return p += s; }
  friend Polynomial operator-(Polynomial p, double s) { return p += -s; }
  friend Polynomial operator-(double s, const Polynomial& p) { return (-p) + s; }

  friend Polynomial operator*(const Polynomial& p, const Polynomial& q) {
    p.check_ring(q.num_vars_);
    TermMap t;
    for (const auto& [ma, ca] : p.terms_) {
      for (const auto& [mb, cb] : q.terms_) t[ma * mb] += ca * cb;
    }
    return Polynomial(p.num_vars_, std::move(t));
  }
  Polynomial& operator*=(const Polynomial& q) { return *this = *this * q; }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.num_vars_ == b.num_vars_ && a.terms_ == b.terms_;
  }

  Polynomial pow(int e) const {
    if (e < 0) throw std::invalid_argument("Polynomial::pow: negative exponent");
    Polynomial r = constant(num_vars_, 1.0);
    for (int i = 0; i < e; ++i) r *= *this;
    return r;
  }

  /// Replaces variable `var` by `q` (same ring).
  Polynomial substitute(int var, const Polynomial& q) const {
    check_ring(q.num_vars_);
    if (var < 0 || var >= num_vars_) throw std::out_of_range("substitute: bad variable");
    Polynomial out(num_vars_);
    for (const auto& [m, c] : terms_) {
      std::vector<int> rest(m.exponents().begin(), m.exponents().end());
      const int e = rest[static_cast<size_t>(var)];
      rest[static_cast<size_t>(var)] = 0;
      out += monomial(Monomial(std::move(rest)), c) * q.pow(e);
    }
    return out;
  }

  /// Largest absolute coefficient difference to `other`.
  double max_abs_difference(const Polynomial& other) const {
    double d = 0.0;
    for (const auto& [m, c] : (*this - other).terms_) d = std::max(d, std::abs(c));
    return d;
  }

  /// Text form "c*x1^a*x2^b + ..." with 17 significant digits, highest degree
  /// first. Parsing the output reproduces the polynomial exactly.
  std::string to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
      const auto& [m, c] = *it;
      double mag = c;
      if (first) {
        first = false;
      } else {
        os << (c < 0 ? " - " : " + ");
        mag = std::abs(c);
      }
      os << mag;
      for (int i = 0; i < m.num_vars(); ++i) {
        if (m[i] == 0) continue;
        os << "*x" << (i + 1);
        if (m[i] > 1) os << '^' << m[i];
      }
    }
    return os.str();
  }

  static Polynomial parse(std::string_view text, int num_vars) {
    TermMap t;
    size_t pos = 0;
    auto skip_ws = [&] {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    auto fail = [&](const char* what) {
      throw std::invalid_argument(std::string("Polynomial::parse: ") + what + " at offset " +
                                  std::to_string(pos));
    };
    auto read_int = [&]() {
      size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(std::string(text.substr(pos)), &used);
      } catch (const std::exception&) {
        fail("expected integer");
      }
      pos += used;
      return v;
    };
    double sign = 1.0;
    skip_ws();
    if (pos < text.size() && text[pos] == '-') {
      sign = -1.0;
      ++pos;
    }
    while (true) {
      skip_ws();
      if (pos >= text.size()) fail("unexpected end");
      double coef = 1.0;
      bool expect_factor = true;
      if (text[pos] != 'x') {
        size_t used = 0;
        try {
          coef = std::stod(std::string(text.substr(pos)), &used);
        } catch (const std::exception&) {
          fail("expected coefficient");
        }
        pos += used;
        expect_factor = false;
      }
      std::vector<int> e(static_cast<size_t>(num_vars), 0);
      while (true) {
        skip_ws();
        if (!expect_factor) {
          if (pos >= text.size() || text[pos] != '*') break;
          ++pos;
          skip_ws();
        }
        expect_factor = false;
        if (pos >= text.size() || text[pos] != 'x') fail("expected variable");
        ++pos;
        const int idx = read_int();
        if (idx < 1 || idx > num_vars) fail("variable index out of range");
        int power = 1;
        if (pos < text.size() && text[pos] == '^') {
          ++pos;
          power = read_int();
          if (power < 0) fail("negative exponent");
        }
        e[static_cast<size_t>(idx - 1)] += power;
      }
      t[Monomial(std::move(e))] += sign * coef;
      skip_ws();
      if (pos >= text.size()) break;
      if (text[pos] == '+') {
        sign = 1.0;
      } else if (text[pos] == '-') {
        sign = -1.0;
      } else {
        fail("expected '+' or '-'");
      }
      ++pos;
    }
    return Polynomial(num_vars, std::move(t));
  }

 private:
  void check_ring(int other_vars) const {
    if (other_vars != num_vars_) throw RingMismatch("polynomial ring mismatch");
  }
  void prune() {
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (std::abs(it->second) < kDropTolerance) {
        it = terms_.erase(it);
      } else {
        ++it;
      }
    }
  }

  int num_vars_ = 0;
  TermMap terms_;
};

/// Pseudo-moments y_alpha for every |alpha| <= degree, stored over the
/// graded-lex basis of that degree.
class TruncatedMomentSequence {
 public:
  TruncatedMomentSequence(int num_vars, int degree)
      : index_(std::make_shared<MonomialIndex>(num_vars, degree)),
        values_(Eigen::VectorXd::Zero(index_->size())) {}
  TruncatedMomentSequence(int num_vars, int degree, Eigen::VectorXd values)
      : index_(std::make_shared<MonomialIndex>(num_vars, degree)), values_(std::move(values)) {
    if (values_.size() != index_->size()) {
      throw std::invalid_argument("TruncatedMomentSequence: value count differs from basis");
    }
  }

  /// The point-evaluation sequence [u]_degree.
  static TruncatedMomentSequence from_point(std::span<const double> u, int degree) {
    TruncatedMomentSequence y(static_cast<int>(u.size()), degree);
    for (int i = 0; i < y.index_->size(); ++i) y.values_(i) = (*y.index_)[i].evaluate(u);
    return y;
  }
  static TruncatedMomentSequence from_point(const Eigen::VectorXd& u, int degree) {
    return from_point(std::span<const double>(u.data(), static_cast<size_t>(u.size())), degree);
  }

  int num_vars() const { return index_->num_vars(); }
  int degree() const { return index_->degree(); }
  const MonomialIndex& index() const { return *index_; }
  const Eigen::VectorXd& values() const { return values_; }
  double value(const Monomial& alpha) const { return values_(index_->at(alpha)); }

 private:
  std::shared_ptr<const MonomialIndex> index_;
  Eigen::VectorXd values_;
};

/// Riesz functional L_y(p) = sum_alpha p_alpha y_alpha.
inline double riesz(const TruncatedMomentSequence& y, const Polynomial& p) {
  if (p.num_vars() != y.num_vars()) throw RingMismatch("riesz: ring mismatch");
  if (p.degree() > y.degree()) throw DegreeOverflow("riesz: polynomial degree exceeds tms");
  double s = 0.0;
  for (const auto& [m, c] : p.terms()) s += c * y.value(m);
  return s;
}

/// Half-degree of the localizing basis for g at order l: ceil((2l - deg g)/2).
inline int localizing_order(int l, int deg_g) { return (2 * l - deg_g + 1) / 2; }

/// One symmetric matrix entry written as a linear form in the moments:
/// entry = sum_k coef_k * y[index_k].
struct LinearEntry {
  int row = 0;
  int col = 0;
  std::vector<std::pair<int, double>> terms;
};

/// Linear structure of L_y(g [x]_lg [x]_lg^T) over the tms basis `tms`.
/// Only the upper triangle (row <= col) is returned. `side` receives the
/// matrix dimension.
inline std::vector<LinearEntry> localizing_pattern(const MonomialIndex& tms, const Polynomial& g,
                                                   int l, int* side) {
  if (g.num_vars() != tms.num_vars()) throw RingMismatch("localizing: ring mismatch");
  if (2 * l < g.degree()) throw DegreeOverflow("localizing: 2l < deg g");
  if (tms.degree() < 2 * l) throw DegreeOverflow("localizing: tms degree below 2l");
  const int lg = localizing_order(l, g.degree());
  const MonomialIndex basis(tms.num_vars(), lg);
  *side = basis.size();
  std::vector<LinearEntry> out;
  out.reserve(static_cast<size_t>(basis.size() * (basis.size() + 1) / 2));
  for (int i = 0; i < basis.size(); ++i) {
    for (int j = i; j < basis.size(); ++j) {
      LinearEntry e{i, j, {}};
      const Monomial ab = basis[i] * basis[j];
      for (const auto& [m, c] : g.terms()) e.terms.emplace_back(tms.at(m * ab), c);
      out.push_back(std::move(e));
    }
  }
  return out;
}

inline Eigen::MatrixXd localizing_matrix(const TruncatedMomentSequence& y, const Polynomial& g,
                                         int l) {
  if (y.degree() < 2 * l) throw DegreeOverflow("localizing_matrix: tms degree below 2l");
  int side = 0;
  const auto pattern = localizing_pattern(y.index(), g, l, &side);
  Eigen::MatrixXd L(side, side);
  for (const auto& e : pattern) {
    double v = 0.0;
    for (const auto& [k, c] : e.terms) v += c * y.values()(k);
    L(e.row, e.col) = v;
    L(e.col, e.row) = v;
  }
  return L;
}

inline Eigen::MatrixXd moment_matrix(const TruncatedMomentSequence& y, int l) {
  return localizing_matrix(y, Polynomial::constant(y.num_vars(), 1.0), l);
}

}  // namespace screwcert
