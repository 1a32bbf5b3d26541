#pragma once

// Test worlds: empty room, L-shaped corridor, and a seeded disc forest whose
// density grows along +x. Grid edges act as walls.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "screwcert/geom.hpp"
#include "screwcert/planning.hpp"
#include "screwcert/scenario.hpp"

namespace screwcert {

struct Disc {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

struct World {
  OccupancyGrid grid;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  std::vector<Disc> discs;  // forest only
  double narrowest_gap = std::numeric_limits<double>::infinity();
  int attempts = 1;         // forest draws until a traversable map was found
};

/// Radius of the smallest origin-centred disc containing the body.
inline double circumradius(const SemialgebraicSet& A) {
  double r = 0.0;
  for (const auto& v : enclosing_polygon(A)) r = std::max(r, v.norm());
  return r;
}

/// Half of the narrowest width of the body over all directions.
inline double half_min_width(const SemialgebraicSet& A) {
  const auto poly = enclosing_polygon(A);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 180; ++k) {
    const double a = std::numbers::pi * k / 180.0;
    const Eigen::Vector2d d(std::cos(a), std::sin(a));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& v : poly) {
      lo = std::min(lo, d.dot(v));
      hi = std::max(hi, d.dot(v));
    }
    best = std::min(best, hi - lo);
  }
  return 0.5 * best;
}

/// Narrowest planning inflation: the robot fits when aligned with the path.
inline double plan_inflation(const Scenario& sc, const SemialgebraicSet& A) {
  return sc.plan_inflation > 0.0 ? sc.plan_inflation : half_min_width(A) + 0.06;
}

/// Planning inflations to try in order: room to turn in place first, then
/// the aligned fit. A configured inflation is the only level.
inline std::vector<double> plan_inflation_levels(const Scenario& sc, const SemialgebraicSet& A) {
  if (sc.plan_inflation > 0.0) return {sc.plan_inflation};
  const double narrow = plan_inflation(sc, A);
  const double wide = circumradius(A) + 0.06;
  if (wide <= narrow + 1e-9) return {narrow};
  return {wide, narrow};
}

namespace detail {

inline OccupancyGrid blank_grid(double res, double length, double width) {
  return OccupancyGrid(res, static_cast<int>(std::ceil(length / res - 1e-9)),
                       static_cast<int>(std::ceil(width / res - 1e-9)), Eigen::Vector2d::Zero());
}

inline bool traversable(const OccupancyGrid& g, double inflation, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& b) {
  const OccupancyGrid gi = g.inflated(inflation);
  const auto [si, sj] = gi.world_to_cell(a);
  const auto [ti, tj] = gi.world_to_cell(b);
  return jump_point_search(gi, {si, sj}, {ti, tj}).found;
}

}  // namespace detail

inline World make_empty_world(const Scenario& sc) {
  World w;
  w.grid = detail::blank_grid(sc.resolution, sc.empty_length, sc.empty_width);
  w.start = sc.start_set ? sc.start : Eigen::Vector3d(0.5, 0.5 * sc.empty_width, 0.0);
  w.goal = sc.goal_set ? sc.goal : Eigen::Vector2d(sc.empty_length - 0.5, 0.5 * sc.empty_width);
  return w;
}

/// Horizontal leg along y in [0, width], then a vertical leg along
/// x in [leg_x - width, leg_x] up to leg_y.
inline World make_lturn_world(const Scenario& sc, const SemialgebraicSet& A) {
  const double R = circumradius(A);
  const double wc = sc.lturn_width > 0.0 ? sc.lturn_width : 2.0 * R + 0.35;
  if (wc >= sc.lturn_leg_x || wc >= sc.lturn_leg_y) throw ConfigError("lturn: corridor wider than its legs");
  World w;
  w.grid = detail::blank_grid(sc.resolution, sc.lturn_leg_x, sc.lturn_leg_y);
  w.grid.fill_box(Eigen::Vector2d(-1.0, wc), Eigen::Vector2d(sc.lturn_leg_x - wc, sc.lturn_leg_y + 1.0));
  w.start = sc.start_set ? sc.start : Eigen::Vector3d(R + 0.15, 0.5 * wc, 0.0);
  w.goal = sc.goal_set ? sc.goal : Eigen::Vector2d(sc.lturn_leg_x - 0.5 * wc, sc.lturn_leg_y - R - 0.15);
  return w;
}

/// Dart-throwing Poisson-disc forest. The clearance demanded between two
/// trees shrinks linearly from spacing_start (x = 0) to spacing_end
/// (x = length) and never drops below min_gap; walls keep min_gap too.
/// One pair is then pinched to exactly min_gap. Maps without a path for the
/// plan-inflated robot are redrawn.
inline World make_forest_world(const Scenario& sc, const SemialgebraicSet& A) {
  const double L = sc.forest_length, Wd = sc.forest_width;
  World w;
  w.start = sc.start_set ? sc.start : Eigen::Vector3d(0.5, 0.5 * Wd, 0.0);
  w.goal = sc.goal_set ? sc.goal : Eigen::Vector2d(L - 0.5, 0.5 * Wd);
  const double infl = plan_inflation(sc, A);
  std::mt19937_64 rng(sc.seed);
  std::uniform_real_distribution<double> ux(0.0, L), uy(0.0, Wd), ur(sc.forest_r_min, sc.forest_r_max);
  auto spacing = [&](double x) {
    const double t = std::clamp(x / L, 0.0, 1.0);
    return std::max(sc.forest_min_gap, sc.forest_spacing_start + t * (sc.forest_spacing_end - sc.forest_spacing_start));
  };
  for (int attempt = 1; attempt <= 50; ++attempt) {
    std::vector<Disc> discs;
    int misses = 0;
    while (misses < 3000) {
      const Disc d{Eigen::Vector2d(ux(rng), uy(rng)), ur(rng)};
      bool ok = d.center.y() - d.radius >= sc.forest_min_gap && Wd - d.center.y() - d.radius >= sc.forest_min_gap &&
                (d.center - w.start.head<2>()).norm() >= sc.forest_clear_radius + d.radius &&
                (d.center - w.goal).norm() >= sc.forest_clear_radius + d.radius;
      for (size_t k = 0; ok && k < discs.size(); ++k) {
        const double gap = (d.center - discs[k].center).norm() - d.radius - discs[k].radius;
        const double need = std::max(spacing(d.center.x()), spacing(discs[k].center.x()));
        if (gap < need) ok = false;
      }
      if (ok) {
        discs.push_back(d);
        misses = 0;
      } else {
        ++misses;
      }
    }
    // Pinch: slide one tree of the closest admissible pair towards the other
    // so that the narrowest gap equals min_gap exactly.
    std::vector<std::tuple<double, size_t, size_t>> pairs;
    for (size_t a = 0; a < discs.size(); ++a) {
      for (size_t b = a + 1; b < discs.size(); ++b) {
        pairs.emplace_back((discs[a].center - discs[b].center).norm() - discs[a].radius - discs[b].radius, a, b);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [gap, a, b] : pairs) {
      const Eigen::Vector2d dir = (discs[b].center - discs[a].center).normalized();
      Disc moved = discs[b];
      moved.center = discs[a].center + dir * (discs[a].radius + moved.radius + sc.forest_min_gap);
      bool ok = moved.center.y() - moved.radius >= sc.forest_min_gap &&
                Wd - moved.center.y() - moved.radius >= sc.forest_min_gap && moved.center.x() >= 0.0 &&
                moved.center.x() <= L && (moved.center - w.start.head<2>()).norm() >= sc.forest_clear_radius + moved.radius &&
                (moved.center - w.goal).norm() >= sc.forest_clear_radius + moved.radius;
      for (size_t k = 0; ok && k < discs.size(); ++k) {
        if (k == a || k == b) continue;
        ok = (moved.center - discs[k].center).norm() - moved.radius - discs[k].radius >= sc.forest_min_gap;
      }
      if (ok) {
        discs[b] = moved;
        break;
      }
    }
    OccupancyGrid g = detail::blank_grid(sc.resolution, L, Wd);
    for (const auto& d : discs) g.fill_disc(d.center, d.radius);
    if (detail::traversable(g, infl, w.start.head<2>(), w.goal)) {
      w.grid = std::move(g);
      w.discs = std::move(discs);
      w.attempts = attempt;
      for (size_t a = 0; a < w.discs.size(); ++a) {
        for (size_t b = a + 1; b < w.discs.size(); ++b) {
          w.narrowest_gap = std::min(w.narrowest_gap, (w.discs[a].center - w.discs[b].center).norm() -
                                                          w.discs[a].radius - w.discs[b].radius);
        }
      }
      return w;
    }
  }
  throw ConfigError("forest: no traversable map in 50 draws");
}

inline World build_world(const Scenario& sc, const SemialgebraicSet& A) {
  World w;
  if (sc.map == "empty") {
    w = make_empty_world(sc);
  } else if (sc.map == "lturn") {
    w = make_lturn_world(sc, A);
  } else if (sc.map == "forest") {
    w = make_forest_world(sc, A);
  } else if (sc.map == "file") {
    try {
      w.grid = OccupancyGrid::load(sc.grid_file);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("grid.file: ") + e.what());
    }
    w.start = sc.start;
    w.goal = sc.goal;
  } else {
    throw ConfigError("unknown map '" + sc.map + "'");
  }
  if (w.grid.occupied_at(w.start.head<2>())) throw ConfigError("start lies in an occupied cell");
  if (w.grid.occupied_at(w.goal)) throw ConfigError("goal lies in an occupied cell");
  return w;
}

}  // namespace screwcert
