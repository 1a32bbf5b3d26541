#pragma once

// Receding-horizon navigation: at every control step the robot extracts a
// convex free region from its sensor window, picks a reference from the
// planned path, and applies the certified screw control from solve_step.
// Steps without a safe control apply the null motion and force a replan.
// After nav.stall_steps null motions in a row, the spot the reference pulls
// towards is marked as an obstacle in the planning grids, so the next plan
// avoids a passage the robot cannot enter.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "screwcert/geom.hpp"
#include "screwcert/planning.hpp"
#include "screwcert/relax.hpp"
#include "screwcert/scenario.hpp"
#include "screwcert/screw.hpp"
#include "screwcert/world.hpp"

namespace screwcert {

struct StepLog {
  int step = 0;
  double t = 0.0;
  double x = 0.0, y = 0.0, yaw = 0.0;  // pose before the step
  double w = 0.0, vx = 0.0, vy = 0.0;  // applied control
  double J = 0.0, Jp = 0.0, JR = 0.0;  // cost of the applied control
  std::string status;
  std::string solver_status;
  double lower_bound = 0.0;
  double solve_ms = 0.0;
  double extract_ms = 0.0;
  double margin = 0.0;       // audit margin against the extracted region
  double cross_track = 0.0;  // distance to the tracked path
  bool collision = false;
};

struct RunResult {
  std::string name;
  uint64_t seed = 0;
  bool success = false;
  std::vector<StepLog> steps;
  Pose final_pose;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  double path_length = 0.0;   // travelled
  double final_distance = 0.0;
  int collisions = 0;
  int replans = 0;
  int stall_recoveries = 0;
  std::map<std::string, int> status_counts;
  double narrowest_gap = std::numeric_limits<double>::infinity();
  double wall_seconds = 0.0;

  double straight_distance() const { return (goal - start.head<2>()).norm(); }
  /// Achieved over straight-line distance; unfinished distance counts as travelled.
  double eta() const {
    const double ds = straight_distance();
    return ds > 0.0 ? (path_length + final_distance) / ds : 1.0;
  }
  /// Root mean square distance to the tracked path, metres.
  double mse() const {
    if (steps.empty()) return 0.0;
    double s = 0.0;
    for (const auto& st : steps) s += st.cross_track * st.cross_track;
    return std::sqrt(s / static_cast<double>(steps.size()));
  }
  double traversal_time(double dt) const { return dt * static_cast<double>(steps.size()); }

  /// Deterministic summary (no wall-clock quantities).
  nlohmann::json metrics(double dt) const;
  /// Wall-clock statistics.
  nlohmann::json timing() const;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline nlohmann::json stats(const std::vector<double>& v) {
  nlohmann::json j;
  if (v.empty()) {
    j = {{"count", 0}};
    return j;
  }
  j["count"] = v.size();
  j["min"] = *std::min_element(v.begin(), v.end());
  j["max"] = *std::max_element(v.begin(), v.end());
  j["mean"] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  j["median"] = median(v);
  return j;
}

/// Smallest signed clearance between the moved body and the obstacle discs
/// (occupied cell centres with radius `r`) of the whole map.
inline double world_clearance(const OccupancyGrid& g, const std::vector<Eigen::VectorXd>& boundary,
                              const Pose& pose, double r) {
  double best = std::numeric_limits<double>::infinity();
  const int reach = 2;
  for (const auto& b : boundary) {
    const Eigen::Vector2d p = pose.apply2(b.head<2>());
    const auto [ci, cj] = g.world_to_cell(p);
    for (int di = -reach; di <= reach; ++di) {
      for (int dj = -reach; dj <= reach; ++dj) {
        if (!g.occupied(ci + di, cj + dj)) continue;
        best = std::min(best, (p - g.cell_center(ci + di, cj + dj)).norm() - r);
      }
    }
  }
  return best;
}

inline void mark_inflated(OccupancyGrid& g, int i, int j, double radius) {
  const int r = static_cast<int>(std::ceil(radius / g.resolution()));
  for (int di = -r; di <= r; ++di) {
    for (int dj = -r; dj <= r; ++dj) {
      if (g.in_bounds(i + di, j + dj) && g.resolution() * std::hypot(di, dj) <= radius + 1e-12) {
        g.set(i + di, j + dj, true);
      }
    }
  }
}

}  // namespace detail

inline nlohmann::json RunResult::metrics(double dt) const {
  nlohmann::json j;
  j["name"] = name;
  j["seed"] = seed;
  j["success"] = success;
  j["steps"] = steps.size();
  j["collisions"] = collisions;
  j["replans"] = replans;
  j["stall_recoveries"] = stall_recoveries;
  j["final_distance"] = final_distance;
  j["path_length"] = path_length;
  j["straight_distance"] = straight_distance();
  j["eta"] = eta();
  j["mse"] = mse();
  j["traversal_time"] = traversal_time(dt);
  j["status_counts"] = status_counts;
  double min_margin = std::numeric_limits<double>::infinity();
  for (const auto& s : steps) min_margin = std::min(min_margin, s.margin);
  j["min_margin"] = steps.empty() ? 0.0 : min_margin;
  if (std::isfinite(narrowest_gap)) j["narrowest_gap"] = narrowest_gap;
  return j;
}

inline nlohmann::json RunResult::timing() const {
  std::vector<double> solve, extract;
  for (const auto& s : steps) {
    if (s.status != "Skipped") solve.push_back(s.solve_ms);
    extract.push_back(s.extract_ms);
  }
  nlohmann::json j;
  j["name"] = name;
  j["seed"] = seed;
  j["solve_ms"] = detail::stats(solve);
  j["extract_ms"] = detail::stats(extract);
  j["wall_seconds"] = wall_seconds;
  return j;
}

/// Everything that defines one step's program, valid during the callback.
struct StepInstance {
  const TrackingObjective& objective;
  const FeasibleSet& feasible;
  const SemialgebraicSet& robot;
  const Polytope& region;  // shrunk by region_margin
  const RegionCoefficients& coefficients;
  const MomentProgram& program;
};

struct RunOptions {
  /// Called after each step (for progress output).
  std::function<void(const StepLog&)> on_step;
  /// Called with each assembled step before it is solved.
  std::function<void(int step, const StepInstance&)> on_program;
};

inline StepOptions step_options(const Scenario& sc) {
  StepOptions o;
  o.theta_step = sc.theta_step;
  o.rank_tol = sc.rank_tol;
  o.bisection_iterations = sc.bisection_iterations;
  o.solver.feas_tol = sc.feas_tol;
  o.solver.gap_tol = sc.gap_tol;
  o.solver.max_iter = sc.max_iter;
  return o;
}

inline TrackingObjective scenario_objective(const Scenario& sc, const Pose& reference, const SymbolicPose& sp) {
  const Eigen::Matrix3d Qp = sc.q_p.asDiagonal();
  Matrix9d QR = Matrix9d::Zero();
  for (int i = 0; i < 9; ++i) QR(i, i) = sc.q_r[static_cast<size_t>(i)];
  return build_objective(reference, Qp, QR, sp);
}

inline RunResult run_scenario(const Scenario& sc, const RunOptions& ropt = {}) {
  using clock = std::chrono::steady_clock;
  const auto wall0 = clock::now();
  sc.validate();
  const SemialgebraicSet A = shape_library(sc.shape, sc.shape_params);
  if (A.space_dim != 2) throw ConfigError("navigation needs a planar robot shape");
  const World world = build_world(sc, A);
  const SymbolicPose sp = symbolic_pose(sc.theta_step, true);
  const FeasibleSet G = FeasibleSet::make(true, sc.v_limit, sc.relax_ball);
  const StepOptions sopt = step_options(sc);
  const std::vector<double> infl = plan_inflation_levels(sc, A);
  const double obstacle_r = 0.5 * world.grid.resolution();
  const auto boundary = sample_boundary(A, sopt.audit_samples);

  FreeRegionOptions fopt;
  fopt.seed_footprint = enclosing_polygon(A);

  RunResult res;
  res.name = sc.name;
  res.seed = sc.seed;
  res.goal = world.goal;
  res.start = world.start;
  res.narrowest_gap = world.narrowest_gap;

  // Observed occupancy (unknown cells are free) and its inflated copy for planning.
  const OccupancyGrid& truth = world.grid;
  OccupancyGrid observed(truth.resolution(), truth.width(), truth.height(), truth.origin());
  std::vector<OccupancyGrid> plan_grids(infl.size(), observed);
  for (size_t l = 0; l < infl.size(); ++l) plan_grids[l].inflate_border(infl[l]);
  size_t level = 0;  // plan_grids entry the current path was checked against

  Pose pose = Pose::planar(world.start.x(), world.start.y(), world.start.z());
  Polyline path({pose.p.head<2>(), world.goal});
  bool need_replan = false;
  int stalled = 0;

  auto observe = [&]() {
    const Eigen::Vector2d c = pose.p.head<2>();
    const double reach = sc.sensor_range * std::sqrt(2.0);
    const auto [i0, j0] = truth.world_to_cell(c - Eigen::Vector2d::Constant(reach));
    const auto [i1, j1] = truth.world_to_cell(c + Eigen::Vector2d::Constant(reach));
    const Eigen::Matrix2d Rt = pose.R.topLeftCorner<2, 2>().transpose();
    for (int i = std::max(0, i0); i <= std::min(truth.width() - 1, i1); ++i) {
      for (int j = std::max(0, j0); j <= std::min(truth.height() - 1, j1); ++j) {
        if (!truth.occupied(i, j) || observed.occupied(i, j)) continue;
        const Eigen::Vector2d b = Rt * (truth.cell_center(i, j) - c);
        if (std::abs(b.x()) > sc.sensor_range || std::abs(b.y()) > sc.sensor_range) continue;
        observed.set(i, j, true);
        for (size_t l = 0; l < infl.size(); ++l) detail::mark_inflated(plan_grids[l], i, j, infl[l]);
      }
    }
  };

  auto replan = [&]() {
    ++res.replans;
    for (size_t l = 0; l < plan_grids.size(); ++l) {
      const OccupancyGrid& pg = plan_grids[l];
      const auto [si, sj] = pg.world_to_cell(pose.p.head<2>());
      const auto [ti, tj] = pg.world_to_cell(world.goal);
      const auto s = nearest_free_cell(pg, {si, sj});
      const auto t = nearest_free_cell(pg, {ti, tj});
      if (!s || !t) continue;
      const GridPath gp = jump_point_search(pg, *s, *t);
      if (!gp.found) continue;
      path = Polyline(smooth_path(pg, gp, pose.p.head<2>(), world.goal));
      level = l;
      return;
    }
  };

  for (int step = 0; step < sc.max_steps; ++step) {
    if ((pose.p.head<2>() - world.goal).norm() <= sc.goal_tolerance) break;
    observe();
    if (need_replan || collision_predict(path, plan_grids[level], pose.p.head<2>(), sc.sensor_range)) {
      replan();
      need_replan = false;
    }
    LocalReference ref = local_reference(path, pose, sc.lookahead, sc.goal_tolerance, &plan_grids[level]);
    if (stalled >= sc.stall_steps) {
      const auto [bi, bj] = truth.world_to_cell(ref.point);
      for (size_t l = 0; l < infl.size(); ++l) detail::mark_inflated(plan_grids[l], bi, bj, infl[l]);
      ++res.stall_recoveries;
      stalled = 0;
      replan();
      ref = local_reference(path, pose, sc.lookahead, sc.goal_tolerance, &plan_grids[level]);
    }

    StepLog log;
    log.step = step;
    log.t = sc.dt * step;
    log.x = pose.p.x();
    log.y = pose.p.y();
    log.yaw = pose.yaw();
    log.cross_track = ref.cross_track;

    const TrackingObjective obj = scenario_objective(sc, ref.body, sp);
    ScrewControl u = ScrewControl::planar_control(0.0, 0.0, 0.0);
    std::optional<Polytope> B;
    const auto te0 = clock::now();
    try {
      B = extract_free_region(truth, pose, sc.sensor_range, fopt);
    } catch (const SeedOccupied&) {
      B.reset();
    }
    log.extract_ms = 1e3 * std::chrono::duration<double>(clock::now() - te0).count();

    if (B) {
      const Polytope Bs = B->shrunk(sc.region_margin);
      const RegionCoefficients rc = region_coefficients(Bs, sp);
      const MomentProgram mp = assemble(obj, G, A, rc, sc.relax_k, sc.relax_ell);
      if (ropt.on_program) ropt.on_program(step, StepInstance{obj, G, A, Bs, rc, mp});
      const ControlResult r = solve_step(mp, Bs, sopt);
      log.status = to_string(r.status);
      log.solve_ms = 1e3 * r.solve_seconds;
      log.solver_status = sdp::to_string(r.solver_status);
      log.lower_bound = r.lower_bound;
      if (r.safe()) {
        u = *r.control;
      } else {
        need_replan = true;
      }
    } else {
      log.status = "Skipped";
      need_replan = true;
    }

    const Eigen::VectorXd uv = u.to_vector();
    log.w = uv(0);
    log.vx = uv(1);
    log.vy = uv(2);
    log.J = obj.J.evaluate(uv);
    log.Jp = obj.J_p.evaluate(uv);
    log.JR = obj.J_R.evaluate(uv);

    const Pose motion = exp_map(u, sc.theta_step);
    const Pose next = compose(pose, motion);
    log.margin = B ? audit_margin(A, *B, motion, sopt.audit_samples)
                   : -std::numeric_limits<double>::infinity();
    const double clearance = detail::world_clearance(truth, boundary, next, obstacle_r);
    log.collision = (B && log.margin < -sopt.audit_tol) || clearance < -sopt.audit_tol;
    if (!B) log.margin = clearance;
    if (log.collision) ++res.collisions;
    ++res.status_counts[log.status];

    const double moved = (next.p - pose.p).norm() + std::abs(next.yaw() - pose.yaw());
    stalled = moved < 1e-9 ? stalled + 1 : 0;
    res.path_length += (next.p - pose.p).norm();
    pose = next;
    res.steps.push_back(log);
    if (ropt.on_step) ropt.on_step(log);
  }
  res.final_pose = pose;
  res.final_distance = (pose.p.head<2>() - world.goal).norm();
  res.success = res.final_distance <= sc.goal_tolerance && res.collisions == 0;
  res.wall_seconds = std::chrono::duration<double>(clock::now() - wall0).count();
  return res;
}

/// Per-step CSV. Pose and control columns use 17 significant digits so the
/// pose chain can be replayed exactly.
inline void write_csv(const RunResult& r, std::ostream& os) {
  os << "step,t,x,y,yaw,w,vx,vy,J,Jp,JR,status,solve_ms,margin\n";
  char buf[512];
  for (const auto& s : r.steps) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.3f,%.17g\n",
                  s.step, s.t, s.x, s.y, s.yaw, s.w, s.vx, s.vy, s.J, s.Jp, s.JR, s.status.c_str(), s.solve_ms,
                  s.margin);
    os << buf;
  }
}

/// Aggregate over runs: success rate and min/max/avg of the per-run metrics.
inline nlohmann::json aggregate_metrics(const std::vector<RunResult>& runs, double dt) {
  nlohmann::json j;
  std::vector<double> coll, mse, eta, ttime, replans;
  int ok = 0;
  nlohmann::json per_run = nlohmann::json::array();
  for (const auto& r : runs) {
    per_run.push_back(r.metrics(dt));
    ok += r.success ? 1 : 0;
    coll.push_back(r.collisions);
    mse.push_back(r.mse());
    eta.push_back(r.eta());
    ttime.push_back(r.traversal_time(dt));
    replans.push_back(r.replans);
  }
  auto mma = [](const std::vector<double>& v) {
    nlohmann::json m;
    if (v.empty()) return m;
    m["min"] = *std::min_element(v.begin(), v.end());
    m["max"] = *std::max_element(v.begin(), v.end());
    m["avg"] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    return m;
  };
  j["runs"] = runs.size();
  j["successes"] = ok;
  j["success_rate"] = runs.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(runs.size());
  j["collisions"] = mma(coll);
  j["mse"] = mma(mse);
  j["eta"] = mma(eta);
  j["traversal_time"] = mma(ttime);
  j["replans"] = mma(replans);
  j["per_run"] = per_run;
  return j;
}

inline nlohmann::json aggregate_timing(const std::vector<RunResult>& runs) {
  std::vector<double> solve, extract;
  double wall = 0.0;
  for (const auto& r : runs) {
    for (const auto& s : r.steps) {
      if (s.status != "Skipped") solve.push_back(s.solve_ms);
      extract.push_back(s.extract_ms);
    }
    wall += r.wall_seconds;
  }
  return {{"solve_ms", detail::stats(solve)}, {"extract_ms", detail::stats(extract)}, {"wall_seconds", wall}};
}

}  // namespace screwcert
