#pragma once

// Grid search and path following.
//
// The search graph is the 8-connected grid over free cells; a diagonal move
// requires both orthogonally adjacent cells to be free. Step costs are 1 and
// sqrt(2) (cell units). jump_point_search returns the same cost as dijkstra
// on this graph.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "screwcert/geom.hpp"
#include "screwcert/screw.hpp"

namespace screwcert {

struct Cell {
  int i = 0;
  int j = 0;
  bool operator==(const Cell&) const = default;
};

struct GridPath {
  bool found = false;
  double cost = std::numeric_limits<double>::infinity();  // cell units
  std::vector<Cell> cells;                                 // every cell, start to goal
};

namespace detail {

inline bool free_cell(const OccupancyGrid& g, int i, int j) { return !g.occupied(i, j); }

inline bool can_step(const OccupancyGrid& g, int i, int j, int di, int dj) {
  if (!free_cell(g, i + di, j + dj)) return false;
  if (di != 0 && dj != 0) return free_cell(g, i + di, j) && free_cell(g, i, j + dj);
  return true;
}

inline double octile(int di, int dj) {
  const int a = std::abs(di), b = std::abs(dj);
  return std::max(a, b) - std::min(a, b) + std::sqrt(2.0) * std::min(a, b);
}

struct OpenEntry {
  double f;
  uint64_t seq;
  int node;
  bool operator>(const OpenEntry& o) const { return std::tie(f, seq) > std::tie(o.f, o.seq); }
};

}  // namespace detail

/// Reference search over the full 8-connected graph.
inline GridPath dijkstra(const OccupancyGrid& g, Cell s, Cell t) {
  GridPath out;
  if (!detail::free_cell(g, s.i, s.j) || !detail::free_cell(g, t.i, t.j)) return out;
  const int W = g.width();
  const size_t n = static_cast<size_t>(W) * static_cast<size_t>(g.height());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::priority_queue<detail::OpenEntry, std::vector<detail::OpenEntry>, std::greater<>> open;
  uint64_t seq = 0;
  const int si = s.j * W + s.i, ti = t.j * W + t.i;
  dist[static_cast<size_t>(si)] = 0.0;
  open.push({0.0, seq++, si});
  while (!open.empty()) {
    const auto e = open.top();
    open.pop();
    if (e.f > dist[static_cast<size_t>(e.node)]) continue;
    if (e.node == ti) break;
    const int i = e.node % W, j = e.node / W;
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if ((di == 0 && dj == 0) || !detail::can_step(g, i, j, di, dj)) continue;
        const int m = (j + dj) * W + (i + di);
        const double nd = e.f + ((di != 0 && dj != 0) ? std::sqrt(2.0) : 1.0);
        if (nd < dist[static_cast<size_t>(m)]) {
          dist[static_cast<size_t>(m)] = nd;
          parent[static_cast<size_t>(m)] = e.node;
          open.push({nd, seq++, m});
        }
      }
    }
  }
  if (!std::isfinite(dist[static_cast<size_t>(ti)])) return out;
  out.found = true;
  out.cost = dist[static_cast<size_t>(ti)];
  for (int v = ti; v != -1; v = parent[static_cast<size_t>(v)]) out.cells.push_back({v % W, v / W});
  std::reverse(out.cells.begin(), out.cells.end());
  return out;
}

namespace detail {

class Jps {
 public:
  Jps(const OccupancyGrid& g, Cell t) : g_(g), t_(t) {}

  std::optional<Cell> jump(int x, int y, int px, int py) const {
    for (;;) {
      const int dx = x - px, dy = y - py;
      if (!free_cell(g_, x, y)) return std::nullopt;
      if (x == t_.i && y == t_.j) return Cell{x, y};
      if (dx != 0 && dy != 0) {
        if (jump(x + dx, y, x, y) || jump(x, y + dy, x, y)) return Cell{x, y};
      } else if (dx != 0) {
        if ((free_cell(g_, x, y - 1) && !free_cell(g_, x - dx, y - 1)) ||
            (free_cell(g_, x, y + 1) && !free_cell(g_, x - dx, y + 1))) {
          return Cell{x, y};
        }
      } else {
        if ((free_cell(g_, x - 1, y) && !free_cell(g_, x - 1, y - dy)) ||
            (free_cell(g_, x + 1, y) && !free_cell(g_, x + 1, y - dy))) {
          return Cell{x, y};
        }
      }
      if (!(free_cell(g_, x + dx, y) && free_cell(g_, x, y + dy))) return std::nullopt;
      px = x;
      py = y;
      x += dx;
      y += dy;
    }
  }

  std::vector<Cell> neighbours(Cell c, std::optional<Cell> parent) const {
    std::vector<Cell> out;
    const int x = c.i, y = c.j;
    auto f = [&](int i, int j) { return free_cell(g_, i, j); };
    if (!parent) {
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if ((di != 0 || dj != 0) && can_step(g_, x, y, di, dj)) out.push_back({x + di, y + dj});
        }
      }
      return out;
    }
    const int dx = (x > parent->i) - (x < parent->i);
    const int dy = (y > parent->j) - (y < parent->j);
    if (dx != 0 && dy != 0) {
      if (f(x, y + dy)) out.push_back({x, y + dy});
      if (f(x + dx, y)) out.push_back({x + dx, y});
      if (f(x, y + dy) && f(x + dx, y)) out.push_back({x + dx, y + dy});
    } else if (dx != 0) {
      const bool next = f(x + dx, y), top = f(x, y + 1), bottom = f(x, y - 1);
      if (next) {
        out.push_back({x + dx, y});
        if (top) out.push_back({x + dx, y + 1});
        if (bottom) out.push_back({x + dx, y - 1});
      }
      if (top) out.push_back({x, y + 1});
      if (bottom) out.push_back({x, y - 1});
    } else {
      const bool next = f(x, y + dy), right = f(x + 1, y), left = f(x - 1, y);
      if (next) {
        out.push_back({x, y + dy});
        if (right) out.push_back({x + 1, y + dy});
        if (left) out.push_back({x - 1, y + dy});
      }
      if (right) out.push_back({x + 1, y});
      if (left) out.push_back({x - 1, y});
    }
    return out;
  }

 private:
  const OccupancyGrid& g_;
  Cell t_;
};

}  // namespace detail

/// Jump point search (A* over jump points with the octile heuristic).
inline GridPath jump_point_search(const OccupancyGrid& g, Cell s, Cell t) {
  GridPath out;
  if (!detail::free_cell(g, s.i, s.j) || !detail::free_cell(g, t.i, t.j)) return out;
  const int W = g.width();
  const size_t n = static_cast<size_t>(W) * static_cast<size_t>(g.height());
  std::vector<double> gs(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<char> closed(n, 0);
  std::priority_queue<detail::OpenEntry, std::vector<detail::OpenEntry>, std::greater<>> open;
  const detail::Jps jps(g, t);
  uint64_t seq = 0;
  auto id = [W](Cell c) { return c.j * W + c.i; };
  auto h = [&](Cell c) { return detail::octile(c.i - t.i, c.j - t.j); };
  gs[static_cast<size_t>(id(s))] = 0.0;
  open.push({h(s), seq++, id(s)});
  bool reached = false;
  while (!open.empty()) {
    const auto e = open.top();
    open.pop();
    const auto ue = static_cast<size_t>(e.node);
    if (closed[ue]) continue;
    closed[ue] = 1;
    const Cell c{e.node % W, e.node / W};
    if (c == t) {
      reached = true;
      break;
    }
    std::optional<Cell> par;
    if (parent[ue] >= 0) par = Cell{parent[ue] % W, parent[ue] / W};
    for (const Cell nb : jps.neighbours(c, par)) {
      const auto jp = jps.jump(nb.i, nb.j, c.i, c.j);
      if (!jp) continue;
      const auto uj = static_cast<size_t>(id(*jp));
      if (closed[uj]) continue;
      const double ng = gs[ue] + detail::octile(jp->i - c.i, jp->j - c.j);
      if (ng < gs[uj]) {
        gs[uj] = ng;
        parent[uj] = e.node;
        open.push({ng + h(*jp), seq++, id(*jp)});
      }
    }
  }
  if (!reached) return out;
  out.found = true;
  out.cost = gs[static_cast<size_t>(id(t))];
  std::vector<Cell> jumps;
  for (int v = id(t); v != -1; v = parent[static_cast<size_t>(v)]) jumps.push_back({v % W, v / W});
  std::reverse(jumps.begin(), jumps.end());
  out.cells.push_back(jumps.front());
  for (size_t k = 1; k < jumps.size(); ++k) {
    Cell c = jumps[k - 1];
    const int dx = (jumps[k].i > c.i) - (jumps[k].i < c.i);
    const int dy = (jumps[k].j > c.j) - (jumps[k].j < c.j);
    while (!(c == jumps[k])) {
      c.i += dx;
      c.j += dy;
      out.cells.push_back(c);
    }
  }
  return out;
}

/// Nearest free cell by ring search (Chebyshev radius up to max_radius).
inline std::optional<Cell> nearest_free_cell(const OccupancyGrid& g, Cell c, int max_radius = 50) {
  if (!g.occupied(c.i, c.j)) return c;
  for (int r = 1; r <= max_radius; ++r) {
    std::optional<Cell> best;
    double bd = std::numeric_limits<double>::infinity();
    for (int di = -r; di <= r; ++di) {
      for (int dj = -r; dj <= r; ++dj) {
        if (std::max(std::abs(di), std::abs(dj)) != r || g.occupied(c.i + di, c.j + dj)) continue;
        const double d = std::hypot(di, dj);
        if (d < bd) {
          bd = d;
          best = Cell{c.i + di, c.j + dj};
        }
      }
    }
    if (best) return best;
  }
  return std::nullopt;
}

/// True when the straight segment a-b only crosses free cells.
inline bool line_of_sight(const OccupancyGrid& g, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / (0.25 * g.resolution()))));
  for (int k = 0; k <= n; ++k) {
    if (g.occupied_at(a + (b - a) * (static_cast<double>(k) / n))) return false;
  }
  return true;
}

/// World-frame waypoints from a cell path, shortcut greedily by line of sight.
inline std::vector<Eigen::Vector2d> smooth_path(const OccupancyGrid& g, const GridPath& p,
                                                const Eigen::Vector2d& start, const Eigen::Vector2d& goal) {
  std::vector<Eigen::Vector2d> pts;
  pts.push_back(start);
  for (size_t k = 1; k + 1 < p.cells.size(); ++k) pts.push_back(g.cell_center(p.cells[k].i, p.cells[k].j));
  pts.push_back(goal);
  std::vector<Eigen::Vector2d> out{pts.front()};
  size_t a = 0;
  while (a + 1 < pts.size()) {
    size_t b = a + 1;
    for (size_t c = pts.size() - 1; c > a + 1; --c) {
      if (line_of_sight(g, pts[a], pts[c])) {
        b = c;
        break;
      }
    }
    out.push_back(pts[b]);
    a = b;
  }
  return out;
}

/// Piecewise-linear path in the plane, parametrized by arc length.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Eigen::Vector2d> pts) : pts_(std::move(pts)) {
    if (pts_.empty()) throw std::invalid_argument("Polyline: no points");
    cum_.push_back(0.0);
    for (size_t k = 1; k < pts_.size(); ++k) cum_.push_back(cum_.back() + (pts_[k] - pts_[k - 1]).norm());
  }

  const std::vector<Eigen::Vector2d>& points() const { return pts_; }
  double length() const { return cum_.back(); }

  struct Projection {
    double s = 0.0;
    double distance = 0.0;
    Eigen::Vector2d point = Eigen::Vector2d::Zero();
  };

  Projection project(const Eigen::Vector2d& q) const {
    Projection best{0.0, (q - pts_.front()).norm(), pts_.front()};
    for (size_t k = 1; k < pts_.size(); ++k) {
      const Eigen::Vector2d a = pts_[k - 1], d = pts_[k] - a;
      const double L2 = d.squaredNorm();
      const double t = L2 > 0.0 ? std::clamp((q - a).dot(d) / L2, 0.0, 1.0) : 0.0;
      const Eigen::Vector2d p = a + t * d;
      const double dist = (q - p).norm();
      if (dist < best.distance) best = {cum_[k - 1] + t * std::sqrt(L2), dist, p};
    }
    return best;
  }

  Eigen::Vector2d point_at(double s) const {
    s = std::clamp(s, 0.0, length());
    const size_t k = segment_at(s);
    if (k == 0) return pts_.front();
    const double L = cum_[k] - cum_[k - 1];
    const double t = L > 0.0 ? (s - cum_[k - 1]) / L : 0.0;
    return pts_[k - 1] + t * (pts_[k] - pts_[k - 1]);
  }

  /// Unit tangent at arc length s (zero for a single-point path).
  Eigen::Vector2d tangent_at(double s) const {
    size_t k = segment_at(std::clamp(s, 0.0, length()));
    for (; k < pts_.size(); ++k) {
      if (k > 0 && (pts_[k] - pts_[k - 1]).norm() > 0.0) return (pts_[k] - pts_[k - 1]).normalized();
    }
    for (size_t m = pts_.size() - 1; m > 0; --m) {
      if ((pts_[m] - pts_[m - 1]).norm() > 0.0) return (pts_[m] - pts_[m - 1]).normalized();
    }
    return Eigen::Vector2d::Zero();
  }

 private:
  size_t segment_at(double s) const {
    for (size_t k = 1; k < cum_.size(); ++k) {
      if (s <= cum_[k]) return k;
    }
    return cum_.size() - 1;
  }

  std::vector<Eigen::Vector2d> pts_;
  std::vector<double> cum_;
};

struct LocalReference {
  Pose body;                                         // reference in the robot frame
  Eigen::Vector2d point = Eigen::Vector2d::Zero();   // world frame
  double heading = 0.0;                              // world frame
  double cross_track = 0.0;                          // distance robot to path
};

/// Reference pose `lookahead` metres ahead of the robot's projection on the
/// path. When `sight` is given the lookahead shrinks (in 5 cm steps) until
/// the reference point is visible from the projection in that grid, so the
/// reference never sits around a corner. The heading follows the path
/// tangent; within `goal_tolerance` of the path end it is the robot's own
/// heading, so at the goal the reference is the identity.
inline LocalReference local_reference(const Polyline& path, const Pose& robot, double lookahead,
                                      double goal_tolerance, const OccupancyGrid* sight = nullptr) {
  LocalReference ref;
  const Eigen::Vector2d q = robot.p.head<2>();
  const auto pr = path.project(q);
  ref.cross_track = pr.distance;
  double s = std::min(pr.s + lookahead, path.length());
  if (sight != nullptr) {
    while (s - pr.s > 0.05 && !line_of_sight(*sight, pr.point, path.point_at(s))) s -= 0.05;
  }
  ref.point = path.point_at(s);
  const Eigen::Vector2d tan = path.tangent_at(s);
  const bool at_end = (q - path.points().back()).norm() <= goal_tolerance || tan.norm() == 0.0;
  ref.heading = at_end ? robot.yaw() : std::atan2(tan.y(), tan.x());
  if (at_end && (q - path.points().back()).norm() <= goal_tolerance) ref.point = q;
  const Pose world = Pose::planar(ref.point.x(), ref.point.y(), ref.heading);
  ref.body = compose(invert(robot), world);
  return ref;
}

/// First point along the path, within `horizon` metres of arc ahead of the
/// robot's projection, that falls in an occupied cell.
inline std::optional<Eigen::Vector2d> collision_predict(const Polyline& path, const OccupancyGrid& g,
                                                        const Eigen::Vector2d& robot, double horizon) {
  const double s0 = path.project(robot).s;
  const double s1 = std::min(path.length(), s0 + horizon);
  const double ds = 0.5 * g.resolution();
  for (double s = s0; s <= s1 + 1e-12; s += ds) {
    const Eigen::Vector2d p = path.point_at(s);
    if (g.occupied_at(p)) return p;
  }
  return std::nullopt;
}

}  // namespace screwcert
