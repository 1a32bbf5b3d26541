#pragma once

// Robot bodies as semialgebraic sets, convex polytopic free regions,
// control-dependent face coefficients, occupancy grids and the free-region
// extractor used by the navigation loop.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "screwcert/polyalg.hpp"
#include "screwcert/screw.hpp"

namespace screwcert {

/// {x : f_j(x) >= 0 for all j}.
struct SemialgebraicSet {
  std::string name;
  int space_dim = 2;
  std::vector<Polynomial> polys;
  Eigen::VectorXd witness;
  bool compact = true;
  double enclosing_radius = 0.0;
  /// CCW vertices when the set is a 2D polygon (all defining polynomials affine).
  std::vector<Eigen::Vector2d> polygon;

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    for (const auto& f : polys) {
      if (f.evaluate(x) < -tol) return false;
    }
    return true;
  }

  /// Smallest defining-polynomial value at x.
  double min_value(const Eigen::VectorXd& x) const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& f : polys) v = std::min(v, f.evaluate(x));
    return v;
  }

  int max_degree() const {
    int d = 0;
    for (const auto& f : polys) d = std::max(d, f.degree());
    return d;
  }

  bool is_polygon() const { return !polygon.empty(); }

  /// Copy with the redundant ball constraint rho^2 - |x|^2 >= 0 appended.
  SemialgebraicSet with_ball(double margin = 1.5) const {
    if (!compact) throw std::logic_error("with_ball: set is not flagged compact");
    SemialgebraicSet s = *this;
    const double rho = margin * enclosing_radius;
    Polynomial ball = Polynomial::constant(space_dim, rho * rho);
    for (int i = 0; i < space_dim; ++i) {
      ball -= Polynomial::variable(space_dim, i).pow(2);
    }
    s.polys.push_back(ball);
    s.polygon.clear();
    return s;
  }
};

/// Face i is b_i - a_i'x >= 0 with |a_i| = 1.
struct Face {
  Eigen::VectorXd normal;
  double offset = 0.0;

  double value(const Eigen::VectorXd& x) const { return offset - normal.dot(x); }
  Polynomial polynomial() const {
    const int d = static_cast<int>(normal.size());
    Polynomial f = Polynomial::constant(d, offset);
    for (int i = 0; i < d; ++i) f -= normal(i) * Polynomial::variable(d, i);
    return f;
  }
};

struct Polytope {
  int space_dim = 2;
  std::vector<Face> faces;

  static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Polytope p;
    p.space_dim = static_cast<int>(lo.size());
    for (int i = 0; i < p.space_dim; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(p.space_dim);
      e(i) = 1.0;
      p.add_face(e, hi(i));
      p.add_face(-e, -lo(i));
    }
    return p;
  }

  /// Adds a'x <= b after normalizing a.
  void add_face(const Eigen::VectorXd& a, double b) {
    const double nrm = a.norm();
    if (!(nrm > 0.0)) throw std::invalid_argument("Polytope: zero normal");
    faces.push_back({a / nrm, b / nrm});
  }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    for (const auto& f : faces) {
      if (f.value(x) < -tol) return false;
    }
    return true;
  }
  bool strictly_contains(const Eigen::VectorXd& x) const {
    for (const auto& f : faces) {
      if (!(f.value(x) > 0.0)) return false;
    }
    return true;
  }

  double min_value(const Eigen::VectorXd& x) const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& f : faces) v = std::min(v, f.value(x));
    return v;
  }

  /// Offsets reduced by `margin`.
  Polytope shrunk(double margin) const {
    Polytope p = *this;
    for (auto& f : p.faces) f.offset -= margin;
    return p;
  }

  /// CCW vertices of a bounded 2D polygon (empty when degenerate).
  std::vector<Eigen::Vector2d> vertices2d() const {
    if (space_dim != 2) throw std::logic_error("vertices2d: polytope is not planar");
    std::vector<Eigen::Vector2d> pts;
    const double tol = 1e-9;
    for (size_t i = 0; i < faces.size(); ++i) {
      for (size_t j = i + 1; j < faces.size(); ++j) {
        Eigen::Matrix2d M;
        M.row(0) = faces[i].normal.transpose();
        M.row(1) = faces[j].normal.transpose();
        if (std::abs(M.determinant()) < 1e-12) continue;
        const Eigen::Vector2d v = M.inverse() * (Eigen::Vector2d(faces[i].offset, faces[j].offset));
        if (contains(v, tol)) pts.push_back(v);
      }
    }
    if (pts.empty()) return pts;
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& v : pts) c += v;
    c /= static_cast<double>(pts.size());
    std::sort(pts.begin(), pts.end(), [&](const auto& a, const auto& b) {
      return std::atan2(a.y() - c.y(), a.x() - c.x()) < std::atan2(b.y() - c.y(), b.x() - c.x());
    });
    std::vector<Eigen::Vector2d> out;
    for (const auto& v : pts) {
      if (out.empty() || (v - out.back()).norm() > 1e-9) out.push_back(v);
    }
    if (out.size() > 1 && (out.front() - out.back()).norm() <= 1e-9) out.pop_back();
    return out;
  }

  /// Drops faces that do not support an edge of the (bounded, 2D) polygon.
  Polytope without_redundant_faces() const {
    if (space_dim != 2) return *this;
    const auto verts = vertices2d();
    if (verts.size() < 3) return *this;
    Polytope out;
    out.space_dim = 2;
    for (const auto& f : faces) {
      int on = 0;
      for (const auto& v : verts) {
        if (std::abs(f.value(v)) <= 1e-9) ++on;
      }
      bool dup = false;
      for (const auto& g : out.faces) {
        if ((g.normal - f.normal).norm() < 1e-12 && std::abs(g.offset - f.offset) < 1e-12) dup = true;
      }
      if (on >= 2 && !dup) out.faces.push_back(f);
    }
    return out;
  }

  SemialgebraicSet to_set(std::string name = "polytope") const {
    SemialgebraicSet s;
    s.name = std::move(name);
    s.space_dim = space_dim;
    for (const auto& f : faces) s.polys.push_back(f.polynomial());
    if (space_dim == 2) {
      s.polygon = vertices2d();
      Eigen::Vector2d c = Eigen::Vector2d::Zero();
      double r = 0.0;
      for (const auto& v : s.polygon) c += v;
      if (!s.polygon.empty()) c /= static_cast<double>(s.polygon.size());
      for (const auto& v : s.polygon) r = std::max(r, v.norm());
      s.witness = c;
      s.enclosing_radius = r;
    }
    return s;
  }
};

namespace detail {

inline SemialgebraicSet polygon_set(std::string name, std::vector<Eigen::Vector2d> verts) {
  SemialgebraicSet s;
  s.name = std::move(name);
  s.space_dim = 2;
  const size_t n = verts.size();
  double r = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = verts[i];
    const Eigen::Vector2d& b = verts[(i + 1) % n];
    Eigen::Vector2d normal(b.y() - a.y(), a.x() - b.x());
    normal.normalize();
    Face f{normal, normal.dot(a)};
    s.polys.push_back(f.polynomial());
    r = std::max(r, a.norm());
  }
  s.polygon = std::move(verts);
  s.witness = Eigen::VectorXd::Zero(2);
  s.enclosing_radius = r;
  return s;
}

inline std::vector<Eigen::Vector2d> regular_polygon(int sides, double radius) {
  std::vector<Eigen::Vector2d> v;
  for (int i = 0; i < sides; ++i) {
    const double a = 2.0 * std::numbers::pi * i / sides;
    v.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return v;
}

}  // namespace detail

/// Body-frame robot shapes centred at the origin, heading along +x.
///   triangle(r)          equilateral, circumradius r, a vertex on +x
///   diamond(r) / (rx,ry) |x|/rx + |y|/ry <= 1
///   hexagon(r)           regular, circumradius r
///   ellipse(a, b)        1 - x^2/a^2 - y^2/b^2 >= 0
///   rectangle(w, l)      |x| <= l/2, |y| <= w/2
inline SemialgebraicSet shape_library(const std::string& name, const std::vector<double>& params) {
  auto need = [&](size_t lo, size_t hi) {
    if (params.size() < lo || params.size() > hi) {
      throw std::invalid_argument("shape_library: wrong parameter count for " + name);
    }
    for (double p : params) {
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("shape_library: parameters must be positive for " + name);
      }
    }
  };
  if (name == "triangle") {
    need(1, 1);
    return detail::polygon_set(name, detail::regular_polygon(3, params[0]));
  }
  if (name == "hexagon") {
    need(1, 1);
    return detail::polygon_set(name, detail::regular_polygon(6, params[0]));
  }
  if (name == "diamond") {
    need(1, 2);
    const double rx = params[0];
    const double ry = params.size() > 1 ? params[1] : params[0];
    return detail::polygon_set(name, {{rx, 0.0}, {0.0, ry}, {-rx, 0.0}, {0.0, -ry}});
  }
  if (name == "rectangle") {
    need(2, 2);
    const double hw = 0.5 * params[0];
    const double hl = 0.5 * params[1];
    return detail::polygon_set(name, {{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}});
  }
  if (name == "ellipse") {
    need(1, 2);
    const double a = params[0];
    const double b = params.size() > 1 ? params[1] : params[0];
    SemialgebraicSet s;
    s.name = name;
    s.space_dim = 2;
    s.polys.push_back(1.0 - (1.0 / (a * a)) * Polynomial::variable(2, 0).pow(2) -
                      (1.0 / (b * b)) * Polynomial::variable(2, 1).pow(2));
    s.witness = Eigen::VectorXd::Zero(2);
    s.enclosing_radius = std::max(a, b);
    return s;
  }
  throw std::invalid_argument("shape_library: unknown shape '" + name + "'");
}

/// Per face of B, the coefficients of the face polynomial seen from the
/// post-motion frame {b'}, over [x]_1 = (1, x1, ..., xd), as polynomials
/// in the control vector.
struct RegionCoefficients {
  int space_dim = 2;
  int num_control_vars = 3;
  std::vector<std::vector<Polynomial>> faces;

  int max_degree() const {
    int d = 0;
    for (const auto& f : faces)
      for (const auto& c : f) d = std::max(d, c.degree());
    return d;
  }

  /// Face i as a polynomial in x for a fixed control u.
  Polynomial face_polynomial(size_t i, const Eigen::VectorXd& u) const {
    Polynomial f = Polynomial::constant(space_dim, faces[i][0].evaluate(u));
    for (int k = 0; k < space_dim; ++k) {
      f += faces[i][static_cast<size_t>(k + 1)].evaluate(u) * Polynomial::variable(space_dim, k);
    }
    return f;
  }
};

/// Substitutes x <- R(u) x + p(u) into each face b_i - a_i'x of B.
inline RegionCoefficients region_coefficients(const Polytope& B, const SymbolicPose& sp) {
  const int d = B.space_dim;
  if (d != 2 && d != 3) throw std::invalid_argument("region_coefficients: dimension must be 2 or 3");
  if (d == 3 && sp.planar) {
    // A planar motion still acts on 3D geometry; allowed.
  }
  RegionCoefficients rc;
  rc.space_dim = d;
  rc.num_control_vars = sp.num_control_vars;
  const int n = sp.num_control_vars;
  for (const auto& f : B.faces) {
    if (f.normal.size() != d) throw std::invalid_argument("region_coefficients: face dimension");
    std::vector<Polynomial> c(static_cast<size_t>(d + 1), Polynomial(n));
    Polynomial c0 = Polynomial::constant(n, f.offset);
    for (int i = 0; i < d; ++i) c0 -= f.normal(i) * sp.p[static_cast<size_t>(i)];
    c[0] = c0;
    // Linear part: -(R^T a)_k = -sum_i R_ik a_i.
    for (int k = 0; k < d; ++k) {
      Polynomial ck(n);
      for (int i = 0; i < d; ++i) ck -= f.normal(i) * sp.R[static_cast<size_t>(i)][static_cast<size_t>(k)];
      c[static_cast<size_t>(k + 1)] = ck;
    }
    rc.faces.push_back(std::move(c));
  }
  return rc;
}

/// Boundary points of a set: exact edge sampling for polygons, ray casting
/// from the witness point otherwise.
inline std::vector<Eigen::VectorXd> sample_boundary(const SemialgebraicSet& S, int k) {
  std::vector<Eigen::VectorXd> out;
  if (k <= 0) return out;
  if (S.is_polygon()) {
    const auto& V = S.polygon;
    const size_t nv = V.size();
    double perim = 0.0;
    for (size_t i = 0; i < nv; ++i) perim += (V[(i + 1) % nv] - V[i]).norm();
    // Every vertex, then the remaining budget spread by arc length.
    for (const auto& v : V) out.emplace_back(Eigen::VectorXd(v));
    const int rest = std::max(0, k - static_cast<int>(nv));
    for (int s = 0; s < rest; ++s) {
      double t = perim * (s + 0.5) / rest;
      for (size_t i = 0; i < nv; ++i) {
        const Eigen::Vector2d a = V[i];
        const Eigen::Vector2d b = V[(i + 1) % nv];
        const double len = (b - a).norm();
        if (t <= len || i + 1 == nv) {
          out.emplace_back(Eigen::VectorXd(a + (b - a) * std::min(1.0, t / len)));
          break;
        }
        t -= len;
      }
    }
    return out;
  }
  const int d = S.space_dim;
  auto boundary_along = [&](const Eigen::VectorXd& dir) {
    double lo = 0.0;
    double hi = std::max(1e-6, 2.0 * S.enclosing_radius);
    while (S.contains(S.witness + hi * dir)) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (S.contains(S.witness + mid * dir)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return Eigen::VectorXd(S.witness + lo * dir);
  };
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd dir(d);
    if (d == 2) {
      const double a = 2.0 * std::numbers::pi * i / k;
      dir << std::cos(a), std::sin(a);
    } else {
      // Fibonacci sphere.
      const double z = 1.0 - 2.0 * (i + 0.5) / k;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = i * std::numbers::pi * (3.0 - std::sqrt(5.0));
      dir << r * std::cos(phi), r * std::sin(phi), z;
    }
    out.push_back(boundary_along(dir));
  }
  return out;
}

inline bool membership(const SemialgebraicSet& S, const Eigen::VectorXd& x, double tol = 0.0) {
  return S.contains(x, tol);
}
inline bool membership(const Polytope& P, const Eigen::VectorXd& x, double tol = 0.0) {
  return P.contains(x, tol);
}

/// Convex polygon enclosing a planar body (exact for polygons, a
/// circumscribed 24-gon for curved sets).
inline std::vector<Eigen::Vector2d> enclosing_polygon(const SemialgebraicSet& S) {
  if (S.space_dim != 2) throw std::invalid_argument("enclosing_polygon: planar sets only");
  if (S.is_polygon()) return S.polygon;
  const int n = 24;
  const auto pts = sample_boundary(S, 720);
  std::vector<Eigen::Vector2d> out;
  // Support lines in n directions, intersected pairwise.
  std::vector<std::pair<Eigen::Vector2d, double>> lines;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    const Eigen::Vector2d dir(std::cos(a), std::sin(a));
    double h = -std::numeric_limits<double>::infinity();
    for (const auto& p : pts) h = std::max(h, dir.dot(p.head<2>()));
    lines.emplace_back(dir, h * 1.01 + 1e-9);
  }
  for (int i = 0; i < n; ++i) {
    const auto& [a1, b1] = lines[static_cast<size_t>(i)];
    const auto& [a2, b2] = lines[static_cast<size_t>((i + 1) % n)];
    Eigen::Matrix2d M;
    M.row(0) = a1.transpose();
    M.row(1) = a2.transpose();
    out.push_back(M.inverse() * Eigen::Vector2d(b1, b2));
  }
  return out;
}

/// Closest point of a convex CCW polygon to q (q itself when inside).
inline Eigen::Vector2d closest_point_on_polygon(const std::vector<Eigen::Vector2d>& poly,
                                                const Eigen::Vector2d& q) {
  if (poly.size() == 1) return poly.front();
  bool inside = poly.size() >= 3;
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_pt = poly.front();
  for (size_t i = 0; i < poly.size(); ++i) {
    const Eigen::Vector2d a = poly[i];
    const Eigen::Vector2d b = poly[(i + 1) % poly.size()];
    const Eigen::Vector2d e = b - a;
    const double cross = e.x() * (q.y() - a.y()) - e.y() * (q.x() - a.x());
    if (cross < 0.0) inside = false;
    const double t = std::clamp(e.dot(q - a) / std::max(e.squaredNorm(), 1e-300), 0.0, 1.0);
    const Eigen::Vector2d c = a + t * e;
    const double dist = (q - c).squaredNorm();
    if (dist < best) {
      best = dist;
      best_pt = c;
    }
  }
  return inside ? q : best_pt;
}

/// Occupancy raster. Cell (i, j) spans x in origin.x + [i, i+1) * res and
/// y in origin.y + [j, j+1) * res.
///
/// Text format:
///   resolution <m>
///   width <cells>
///   height <cells>
///   origin <x> <y>
///   data
///   <height lines of width '0'/'1' characters; the first line is the top
///    row j = height - 1>
/// Lines starting with '#' are comments.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(double resolution, int width, int height, Eigen::Vector2d origin)
      : resolution_(resolution), width_(width), height_(height), origin_(origin),
        cells_(static_cast<size_t>(width) * static_cast<size_t>(height), 0) {
    if (!(resolution > 0.0) || width <= 0 || height <= 0) {
      throw std::invalid_argument("OccupancyGrid: bad dimensions");
    }
  }

  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Eigen::Vector2d& origin() const { return origin_; }

  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < width_ && j < height_; }
  /// Out-of-bounds cells count as occupied.
  bool occupied(int i, int j) const {
    return !in_bounds(i, j) || cells_[index(i, j)] != 0;
  }
  void set(int i, int j, bool occ) {
    if (!in_bounds(i, j)) throw std::out_of_range("OccupancyGrid::set");
    cells_[index(i, j)] = occ ? 1 : 0;
  }

  Eigen::Vector2d cell_center(int i, int j) const {
    return origin_ + resolution_ * Eigen::Vector2d(i + 0.5, j + 0.5);
  }
  std::pair<int, int> world_to_cell(const Eigen::Vector2d& w) const {
    const Eigen::Vector2d r = (w - origin_) / resolution_;
    return {static_cast<int>(std::floor(r.x())), static_cast<int>(std::floor(r.y()))};
  }
  bool occupied_at(const Eigen::Vector2d& w) const {
    const auto [i, j] = world_to_cell(w);
    return occupied(i, j);
  }

  /// Marks every cell whose centre lies in the disc.
  void fill_disc(const Eigen::Vector2d& c, double radius) {
    const auto [i0, j0] = world_to_cell(c - Eigen::Vector2d::Constant(radius));
    const auto [i1, j1] = world_to_cell(c + Eigen::Vector2d::Constant(radius));
    for (int i = std::max(0, i0); i <= std::min(width_ - 1, i1); ++i) {
      for (int j = std::max(0, j0); j <= std::min(height_ - 1, j1); ++j) {
        if ((cell_center(i, j) - c).norm() <= radius) set(i, j, true);
      }
    }
  }
  /// Marks every cell whose centre lies in the axis-aligned box.
  void fill_box(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi) {
    for (int i = 0; i < width_; ++i) {
      for (int j = 0; j < height_; ++j) {
        const Eigen::Vector2d c = cell_center(i, j);
        if (c.x() >= lo.x() && c.x() <= hi.x() && c.y() >= lo.y() && c.y() <= hi.y()) set(i, j, true);
      }
    }
  }

  /// Marks every cell within `radius` of an out-of-bounds cell centre.
  void inflate_border(double radius) {
    for (int i = 0; i < width_; ++i) {
      for (int j = 0; j < height_; ++j) {
        const int d = std::min({i + 1, j + 1, width_ - i, height_ - j});
        if (resolution_ * d <= radius + 1e-12) cells_[index(i, j)] = 1;
      }
    }
  }

  /// Copy where every cell within `radius` of an occupied cell centre
  /// (including the out-of-bounds ring) is occupied.
  OccupancyGrid inflated(double radius) const {
    OccupancyGrid g = *this;
    g.inflate_border(radius);
    const int r = static_cast<int>(std::ceil(radius / resolution_));
    for (int i = 0; i < width_; ++i) {
      for (int j = 0; j < height_; ++j) {
        if (!cells_[index(i, j)]) continue;
        for (int di = -r; di <= r; ++di) {
          for (int dj = -r; dj <= r; ++dj) {
            if (!in_bounds(i + di, j + dj)) continue;
            if (resolution_ * std::hypot(di, dj) <= radius + 1e-12) g.set(i + di, j + dj, true);
          }
        }
      }
    }
    return g;
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "resolution " << resolution_ << "\nwidth " << width_ << "\nheight " << height_
       << "\norigin " << origin_.x() << ' ' << origin_.y() << "\ndata\n";
    for (int j = height_ - 1; j >= 0; --j) {
      for (int i = 0; i < width_; ++i) os << (cells_[index(i, j)] ? '1' : '0');
      os << '\n';
    }
    return os.str();
  }

  static OccupancyGrid from_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    double res = 0.0;
    int w = 0, h = 0;
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();
    bool have_origin = false;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string key;
      ls >> key;
      if (key == "resolution") {
        ls >> res;
      } else if (key == "width") {
        ls >> w;
      } else if (key == "height") {
        ls >> h;
      } else if (key == "origin") {
        ls >> origin.x() >> origin.y();
        have_origin = true;
      } else if (key == "data") {
        break;
      } else {
        throw std::invalid_argument("OccupancyGrid: unknown header key '" + key + "'");
      }
      if (ls.fail()) throw std::invalid_argument("OccupancyGrid: malformed header line");
    }
    if (!have_origin) throw std::invalid_argument("OccupancyGrid: missing origin");
    OccupancyGrid g(res, w, h, origin);
    for (int j = h - 1; j >= 0; --j) {
      if (!std::getline(is, line)) throw std::invalid_argument("OccupancyGrid: missing raster rows");
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (static_cast<int>(line.size()) != w) {
        throw std::invalid_argument("OccupancyGrid: raster row has wrong width");
      }
      for (int i = 0; i < w; ++i) {
        if (line[static_cast<size_t>(i)] != '0' && line[static_cast<size_t>(i)] != '1') {
          throw std::invalid_argument("OccupancyGrid: raster characters must be 0 or 1");
        }
        g.set(i, j, line[static_cast<size_t>(i)] == '1');
      }
    }
    return g;
  }

  static OccupancyGrid load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open grid file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
  }
  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write grid file " + path);
    f << to_text();
  }

 private:
  size_t index(int i, int j) const {
    return static_cast<size_t>(j) * static_cast<size_t>(width_) + static_cast<size_t>(i);
  }

  double resolution_ = 0.05;
  int width_ = 0;
  int height_ = 0;
  Eigen::Vector2d origin_ = Eigen::Vector2d::Zero();
  std::vector<uint8_t> cells_;
};

struct FreeRegionOptions {
  /// Obstacle disc radius around each occupied cell centre; <= 0 means half a cell.
  double inflation = -1.0;
  /// Body-frame convex polygon that the region must keep (typically the
  /// robot footprint). Empty means the seed point only.
  std::vector<Eigen::Vector2d> seed_footprint;
  bool prune_redundant = true;
};

class SeedOccupied : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Convex obstacle-free polygon around the seed pose, in the body frame.
///
/// Starts from the sensor-range box [-r, r]^2 (body axes). Occupied cell
/// centres become discs of radius `inflation`. Repeatedly, the remaining
/// disc nearest the seed set is separated by the half-plane tangent to it
/// whose normal points from the nearest seed point to the disc centre; discs
/// lying entirely beyond that half-plane are discarded.
inline Polytope extract_free_region(const OccupancyGrid& grid, const Pose& seed_pose,
                                    double sensor_range, const FreeRegionOptions& opt = {}) {
  if (!(sensor_range > 0.0)) throw std::invalid_argument("extract_free_region: range must be > 0");
  const Eigen::Vector2d seed_w = seed_pose.p.head<2>();
  if (grid.occupied_at(seed_w)) throw SeedOccupied("extract_free_region: seed cell is occupied");
  const double r = opt.inflation > 0.0 ? opt.inflation : 0.5 * grid.resolution();
  const Eigen::Matrix2d Rt = seed_pose.R.topLeftCorner<2, 2>().transpose();

  std::vector<Eigen::Vector2d> seed = opt.seed_footprint;
  if (seed.empty()) seed.push_back(Eigen::Vector2d::Zero());

  // Candidate obstacle centres in the body frame.
  const double reach = sensor_range * std::sqrt(2.0) + r + grid.resolution();
  const auto [i0, j0] = grid.world_to_cell(seed_w - Eigen::Vector2d::Constant(reach));
  const auto [i1, j1] = grid.world_to_cell(seed_w + Eigen::Vector2d::Constant(reach));
  struct Cand {
    Eigen::Vector2d q;
    Eigen::Vector2d c;  // closest seed point
    double dist;
  };
  std::vector<Cand> cands;
  for (int i = i0; i <= i1; ++i) {
    for (int j = j0; j <= j1; ++j) {
      if (!grid.occupied(i, j)) continue;
      const Eigen::Vector2d qb = Rt * (grid.cell_center(i, j) - seed_w);
      if (std::abs(qb.x()) >= sensor_range + r || std::abs(qb.y()) >= sensor_range + r) continue;
      const Eigen::Vector2d c = closest_point_on_polygon(seed, qb);
      cands.push_back({qb, c, (qb - c).norm()});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& a, const Cand& b) { return a.dist < b.dist; });

  Polytope P = Polytope::box(Eigen::Vector2d(-sensor_range, -sensor_range),
                             Eigen::Vector2d(sensor_range, sensor_range));
  std::vector<char> alive(cands.size(), 1);
  for (size_t k = 0; k < cands.size(); ++k) {
    if (!alive[k]) continue;
    const Cand& cd = cands[k];
    Eigen::Vector2d nrm = cd.q - cd.c;
    if (nrm.norm() < 1e-12) nrm = cd.q;  // obstacle centre inside the seed set
    if (nrm.norm() < 1e-12) nrm = Eigen::Vector2d::UnitX();
    nrm.normalize();
    const double off = nrm.dot(cd.q) - r;
    P.faces.push_back({Eigen::VectorXd(nrm), off});
    alive[k] = 0;
    for (size_t l = k + 1; l < cands.size(); ++l) {
      if (alive[l] && nrm.dot(cands[l].q) >= nrm.dot(cd.q)) alive[l] = 0;
    }
  }
  return opt.prune_redundant ? P.without_redundant_faces() : P;
}

}  // namespace screwcert
