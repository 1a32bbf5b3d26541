// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Arguments select criteria by number
// (default: all).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "screwcert/certify.hpp"
#include "screwcert/nav.hpp"
#include "screwcert/scenario.hpp"
#include "screwcert/sdpa_io.hpp"
#include "screwcert/setspec.hpp"

namespace fs = std::filesystem;
using namespace screwcert;
using nlohmann::json;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome kinematics() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> th(0.0, std::numbers::pi), un(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 3);
  double worst = 0.0;
  const auto t0 = clock_type::now();
  for (int n = 0; n < 1000; ++n) {
    double theta = th(rng);
    if (theta == 0.0) theta = std::numbers::pi;  // (0, pi]
    const bool planar = n % 2 == 0;
    const SymbolicPose sp = symbolic_pose(theta, planar);
    ScrewControl u;
    const int kind = pick(rng);  // 0: pure translation, otherwise a unit axis
    if (planar) {
      u = ScrewControl::planar_control(kind == 0 ? 0.0 : (kind == 1 ? -1.0 : 1.0), un(rng), un(rng));
    } else {
      Eigen::Vector3d w = Eigen::Vector3d::Zero();
      if (kind != 0) w = Eigen::Vector3d(un(rng), un(rng), un(rng)).normalized();
      u = ScrewControl::spatial(w, Eigen::Vector3d(un(rng), un(rng), un(rng)));
    }
    const Pose a = sp.evaluate(u.to_vector());
    const Pose b = oracle::expm_pose(u, theta);
    worst = std::max({worst, (a.R - b.R).cwiseAbs().maxCoeff(), (a.p - b.p).cwiseAbs().maxCoeff()});
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-9 && secs < 1.0, fmt("max abs error %.3g over 1000 controls, %.3f s", worst, secs)};
}

// ---------------------------------------------------------------- 2

struct ContainmentCase {
  const char* inner;
  const char* outer;
  bool truth;
};

const std::vector<ContainmentCase>& containment_suite() {
  static const std::vector<ContainmentCase> cases = {
      {"box:-0.5,-0.5,0.5,0.5", "box:-2,-2,2,2", true},
      {"ellipse:0.3,0.15", "box:-0.3,-0.15,0.3,0.15", true},
      {"hexagon:0.2", "poly:0.25:0.0625 - x1^2 - x2^2", true},
      {"triangle:0.25", "diamond:0.6", true},
      {"ellipse:0.3,0.3", "triangle:0.7", true},
      {"rectangle:0.3,0.63", "hexagon:0.45", true},
      {"box:-2,-2,2,2", "box:-0.5,-0.5,0.5,0.5", false},
      {"ellipse:0.3,0.15", "box:-0.29,-0.15,0.29,0.15", false},
      {"hexagon:0.2", "poly:0.19:0.0361 - x1^2 - x2^2", false},
      {"triangle:0.25", "box:-0.2,-0.2,0.2,0.2", false},
      {"ellipse:0.36,0.36", "triangle:0.7", false},
      {"rectangle:0.3,0.63", "hexagon:0.38", false},
  };
  return cases;
}

Outcome certificates() {
  const auto t0 = clock_type::now();
  int false_certified = 0, true_missed = 0, witness_on_true = 0, false_without_witness = 0;
  std::string notes;
  for (const auto& c : containment_suite()) {
    const SemialgebraicSet A = parse_set_spec(c.inner);
    const SemialgebraicSet B = parse_set_spec(c.outer);
    int certified_at = 0;
    for (int k = 1; k <= 2 && !certified_at; ++k) {
      int top = A.max_degree();
      for (const auto& f : B.polys) top = std::max(top, f.degree());
      if (2 * k < top) continue;
      if (certify_all(B.polys, A, k).certified) certified_at = k;
    }
    bool witness = false;
    for (const auto& f : B.polys) witness = witness || falsify(f, A, 10000).has_value();
    if (c.truth) {
      if (!certified_at) {
        ++true_missed;
        notes += fmt(" [not certified: %s in %s]", c.inner, c.outer);
      }
      if (witness) ++witness_on_true;
    } else {
      if (certified_at) {
        ++false_certified;
        notes += fmt(" [false certificate: %s in %s]", c.inner, c.outer);
      }
      if (!witness) ++false_without_witness;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = false_certified == 0 && true_missed == 0 && witness_on_true == 0 && false_without_witness == 0 &&
                  secs < 30.0;
  return {ok, fmt("false certified %d/6, true missed %d/6, falsifier: %d witnesses on true, %d false cases "
                  "without witness, %.2f s",
                  false_certified, true_missed, witness_on_true, false_without_witness, secs) +
                  notes};
}

// ---------------------------------------------------------------- 3, 4

struct StepCase {
  TrackingObjective obj;
  FeasibleSet G;
  SemialgebraicSet A;
  oracle::Body body;
  Polytope B;
  RegionCoefficients rc;
};

constexpr double kTheta = 0.2;
constexpr double kVLimit = 0.5;

StepCase make_case(uint64_t seed, const std::string& shape) {
  std::mt19937_64 rng(seed);
  StepCase s;
  if (shape == "ellipse") {
    s.A = shape_library("ellipse", {0.3, 0.15});
    s.body = oracle::Body::from_set(s.A, 0.3, 0.15);
  } else if (shape == "rectangle") {
    s.A = shape_library("rectangle", {0.3, 0.63});
    s.body = oracle::Body::from_set(s.A);
  } else {
    s.A = shape_library(shape, {0.2});
    s.body = oracle::Body::from_set(s.A);
  }
  std::uniform_int_distribution<int> nf(2, 5);
  s.B = oracle::random_region(s.body, rng, nf(rng));
  const SymbolicPose sp = symbolic_pose(kTheta, true);
  const Pose ref = oracle::random_reference(rng, kTheta, kVLimit);
  Matrix9d QR = 0.1 * Matrix9d::Identity();
  s.obj = build_objective(ref, Eigen::Vector3d(5.0, 2.0, 0.0).asDiagonal(), QR, sp);
  s.G = FeasibleSet::make(true, kVLimit);
  s.rc = region_coefficients(s.B, sp);
  return s;
}

const char* kShapes[] = {"hexagon", "triangle", "diamond", "ellipse", "rectangle"};

Outcome sandwich() {
  int violations = 0, rank1 = 0, rank1_violations = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();
  double worst_rank1 = 0.0;
  std::string notes;
  StepOptions opt;
  opt.theta_step = kTheta;
  for (int n = 0; n < 25; ++n) {
    const StepCase s = make_case(3000 + static_cast<uint64_t>(n), kShapes[n % 5]);
    const MomentProgram mp = assemble(s.obj, s.G, s.A, s.rc, 1, 3);
    const ControlResult r = solve_step(mp, s.B, opt);
    const oracle::GridBest g = oracle::grid_oracle(s.obj.J, s.body, s.B, kTheta, kVLimit);
    if (!std::isfinite(r.lower_bound) || !std::isfinite(g.J)) {
      ++violations;
      notes += fmt(" [case %d: no bound (%s) or no grid point]", n, to_string(r.status));
      continue;
    }
    worst_gap = std::max(worst_gap, r.lower_bound - g.J);
    if (r.lower_bound > g.J + 1e-3) {
      ++violations;
      notes += fmt(" [case %d: J_kl %.6g > grid %.6g]", n, r.lower_bound, g.J);
    }
    if (r.status == StepStatus::ExactRank1) {
      ++rank1;
      const double d = std::abs(*r.achieved - r.lower_bound);
      worst_rank1 = std::max(worst_rank1, d);
      if (d > 1e-4 || *r.achieved > g.J + 1e-3) {
        ++rank1_violations;
        notes += fmt(" [case %d: rank-1 J(u*) %.6g, J_kl %.6g, grid %.6g]", n, *r.achieved, r.lower_bound, g.J);
      }
    }
  }
  return {violations == 0 && rank1_violations == 0,
          fmt("25 instances: %d sandwich violations (max J_kl - grid %.2e); %d rank-1, %d violations "
              "(max |J(u*) - J_kl| %.2e)",
              violations, worst_gap, rank1, rank1_violations, worst_rank1) +
              notes};
}

Outcome monotonicity() {
  int bad = 0;
  double worst = -std::numeric_limits<double>::infinity();
  std::string notes;
  for (int n = 0; n < 10; ++n) {
    const StepCase s = make_case(4000 + static_cast<uint64_t>(n), kShapes[n % 5]);
    try {
      const auto sweep = hierarchy_sweep(s.obj, s.G, s.A, s.rc, 1, {3, 4});
      const double d = sweep[0].second - sweep[1].second;
      worst = std::max(worst, d);
      if (d > 1e-7) {
        ++bad;
        notes += fmt(" [case %d: J3 %.10g > J4 %.10g]", n, sweep[0].second, sweep[1].second);
      }
    } catch (const std::exception& e) {
      ++bad;
      notes += fmt(" [case %d: %s]", n, e.what());
    }
  }
  // Ellipse robot: achieved cost must not grow with k.
  StepOptions opt;
  opt.theta_step = kTheta;
  const StepCase e = make_case(4100, "ellipse");
  const auto os = order_sweep(e.obj, e.G, e.A, e.B, e.rc, {1, 2}, 3, opt);
  bool k_ok = os[0].second.achieved && os[1].second.achieved &&
              *os[1].second.achieved <= *os[0].second.achieved + 1e-6;
  const std::string kdesc =
      os[0].second.achieved && os[1].second.achieved
          ? fmt("ellipse achieved k=1 %.10g, k=2 %.10g", *os[0].second.achieved, *os[1].second.achieved)
          : std::string("ellipse: no control at some k");
  return {bad == 0 && k_ok, fmt("10 instances: %d with J_k,3 > J_k,4 + 1e-7 (max J3 - J4 %.2e); ", bad, worst) +
                                kdesc + notes};
}

// ---------------------------------------------------------------- 5, 6, 8

fs::path scenario_path(const std::string& name) { return fs::path(SCREWCERT_SCENARIO_DIR) / name; }

struct Batch {
  std::vector<RunResult> runs;
  double seconds = 0.0;
  std::string metrics;
};

Batch forest_batch() {
  const Scenario base = Scenario::load(scenario_path("forest.toml"));
  Batch b;
  const auto t0 = clock_type::now();
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    Scenario sc = base;
    sc.seed = seed;
    b.runs.push_back(run_scenario(sc));
  }
  b.seconds = seconds_since(t0);
  b.metrics = aggregate_metrics(b.runs, base.dt).dump(2);
  return b;
}

std::optional<Batch> g_batch;
const Batch& batch() {
  if (!g_batch) g_batch = forest_batch();
  return *g_batch;
}

Outcome safety() {
  std::string lt;
  bool lturn_ok = true;
  for (const char* shape : {"triangle", "diamond", "hexagon", "ellipse"}) {
    const Scenario sc = Scenario::load(scenario_path(std::string("lturn_") + shape + ".toml"));
    const RunResult r = run_scenario(sc);
    lturn_ok = lturn_ok && r.success;
    lt += fmt("%s %s (%zu steps, %d collisions); ", shape, r.success ? "ok" : "FAILED", r.steps.size(), r.collisions);
  }
  const Batch& b = batch();
  const json m = json::parse(b.metrics);
  const double cmin = m["collisions"]["min"], cmax = m["collisions"]["max"], cavg = m["collisions"]["avg"];
  const double rate = m["success_rate"], mse = m["mse"]["avg"], eta = m["eta"]["avg"];
  const bool forest_ok = cmin == 0.0 && cmax == 0.0 && cavg == 0.0 && rate == 1.0 && mse <= 0.3 && eta <= 1.5 &&
                         b.seconds < 15 * 60.0;
  return {lturn_ok && forest_ok,
          "L-turn: " + lt +
              fmt("forest x30: collisions %g/%g/%g, success %.0f%%, mean mse %.4f m, mean eta %.4f, %.1f s", cmin,
                  cmax, cavg, 100.0 * rate, mse, eta, b.seconds)};
}

Outcome solve_time() {
  const json t = aggregate_timing(batch().runs);
  const double solve = t["solve_ms"]["median"], extract = t["extract_ms"]["median"];
  return {solve < 100.0 && extract < 1.0,
          fmt("median SDP solve %.2f ms over %d steps, median region extraction %.4f ms", solve,
              t["solve_ms"]["count"].get<int>(), extract)};
}

Outcome determinism() {
  const std::string first = batch().metrics;
  const Batch again = forest_batch();
  return {first == again.metrics, fmt("metrics JSON %zu bytes, rerun %s", first.size(),
                                      first == again.metrics ? "byte-identical" : "DIFFERS")};
}

// ---------------------------------------------------------------- 7

Outcome cross_solver() {
  const fs::path dir = fs::temp_directory_path() / "screwcert_acceptance_sdpa";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Scenario sc = Scenario::load(scenario_path("forest.toml"));
  struct Exported {
    std::string file;
    double internal;
    sdp::SolveStatus status;
  };
  std::vector<Exported> ex;
  struct Enough {};
  RunOptions o;
  o.on_program = [&](int step, const StepInstance& in) {
    const fs::path f = dir / fmt("step_%d.dat-s", step);
    sdp::export_sdpa(in.program.problem, f);
    const sdp::ConicSolution sol = sdp::solve(in.program.problem);
    ex.push_back({f.string(), sol.primal_objective, sol.status});
    if (ex.size() == 5) throw Enough{};
  };
  try {
    run_scenario(sc, o);
  } catch (const Enough&) {
  }
  std::string cmd = std::string(SCREWCERT_PYTHON) + " " + SCREWCERT_CROSSCHECK;
  for (const auto& e : ex) cmd += " " + e.file;
  cmd += " > " + (dir / "external.jsonl").string();
  const int rc = std::system(cmd.c_str());
  if (rc != 0) return {false, fmt("external solver run failed (exit %d): %s", rc, cmd.c_str())};
  std::ifstream in(dir / "external.jsonl");
  std::map<std::string, double> external;
  std::string line;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    if (j.contains("objective")) external[j["file"]] = j["objective"];
  }
  double worst = 0.0;
  int missing = 0, not_optimal = 0;
  for (const auto& e : ex) {
    if (e.status != sdp::SolveStatus::Optimal) ++not_optimal;
    const auto it = external.find(e.file);
    if (it == external.end()) {
      ++missing;
      continue;
    }
    // The SDPA form maximizes the negated internal objective.
    const double mine = -e.internal;
    worst = std::max(worst, std::abs(it->second - mine) / std::max(std::abs(it->second), 1e-12));
  }
  return {ex.size() == 5 && missing == 0 && worst <= 1e-6,
          fmt("%zu programs, %d without external optimum, %d internal non-optimal exits, max relative difference "
              "%.2e",
              ex.size(), missing, not_optimal, worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, kinematics}, {2, certificates}, {3, sandwich},     {4, monotonicity},
      {5, safety},     {6, solve_time},   {7, cross_solver}, {8, determinism},
  };
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!chosen.empty() && !chosen.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
