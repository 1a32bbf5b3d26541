// screwcert: command-line front end.
//
//   screwcert run         --scenario F [--out D] [--seed N] [--set k=v]... [--quiet]
//   screwcert batch       --scenario F --runs N ...
//   screwcert certify     --inner SET --outer SET [--k K]
//   screwcert sweep       --scenario F [--step S] [--ells 3,4] [--ks 1,2]
//   screwcert export-sdpa --scenario F [--count N]
//
// Exit codes: 0 success, 2 goal not reached / not certified, 1 configuration error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "screwcert/certify.hpp"
#include "screwcert/nav.hpp"
#include "screwcert/scenario.hpp"
#include "screwcert/sdpa_io.hpp"
#include "screwcert/setspec.hpp"

namespace fs = std::filesystem;
using namespace screwcert;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNotReached = 2;

struct Common {
  std::string scenario;
  std::string out = "out";
  std::optional<uint64_t> seed;
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c, bool needs_scenario = true) {
  auto* s = sub->add_option("--scenario", c.scenario, "scenario file");
  if (needs_scenario) s->required();
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "override the scenario seed");
  sub->add_option("--set", c.sets, "override a scenario key (key=value), repeatable");
  sub->add_flag("--quiet", c.quiet, "no progress output");
}

void check_solver_backend() {
  const char* env = std::getenv("SCREWCERT_SOLVER");
  if (!env || !*env) return;
  const std::string s(env);
  if (s != "internal") throw ConfigError("SCREWCERT_SOLVER: unknown backend '" + s + "' (available: internal)");
}

Scenario load_scenario(const Common& c) {
  check_solver_backend();
  Scenario sc = Scenario::load(c.scenario);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    sc.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), fs::current_path());
  }
  if (c.seed) sc.seed = *c.seed;
  sc.validate();
  return sc;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

void write_run_csv(const fs::path& p, const RunResult& r) {
  std::ofstream f(p);
  f << "# scenario=" << r.name << " seed=" << r.seed << '\n';
  write_csv(r, f);
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

RunOptions progress(bool quiet, const std::string& tag) {
  RunOptions o;
  if (!quiet) {
    o.on_step = [tag](const StepLog& s) {
      if (s.step % 100 == 0) {
        std::fprintf(stderr, "[%s] step %d  pose (%.3f, %.3f, %.3f)  %s\n", tag.c_str(), s.step, s.x, s.y, s.yaw,
                     s.status.c_str());
      }
    };
  }
  return o;
}

void summary(const RunResult& r) {
  std::fprintf(stderr, "%s seed=%llu: %s after %zu steps, final distance %.3f m, collisions %d, eta %.3f, mse %.4f m\n",
               r.name.c_str(), static_cast<unsigned long long>(r.seed), r.success ? "reached" : "NOT reached",
               r.steps.size(), r.final_distance, r.collisions, r.eta(), r.mse());
}

int cmd_run(const Common& c) {
  const Scenario sc = load_scenario(c);
  const fs::path out = prepare_out(c.out);
  const RunResult r = run_scenario(sc, progress(c.quiet, sc.name));
  write_run_csv(out / (sc.name + ".csv"), r);
  write_text(out / (sc.name + "_metrics.json"), r.metrics(sc.dt).dump(2) + "\n");
  write_text(out / (sc.name + "_timing.json"), r.timing().dump(2) + "\n");
  if (!c.quiet) summary(r);
  return r.success ? kOk : kNotReached;
}

std::string table(const json& m) {
  auto row = [&](const char* label, const char* key, const char* fmt) {
    char buf[256];
    const auto& v = m.at(key);
    char a[64], b[64], d[64];
    std::snprintf(a, sizeof a, fmt, v.at("min").get<double>());
    std::snprintf(b, sizeof b, fmt, v.at("max").get<double>());
    std::snprintf(d, sizeof d, fmt, v.at("avg").get<double>());
    std::snprintf(buf, sizeof buf, "%-22s %10s %10s %10s\n", label, a, b, d);
    return std::string(buf);
  };
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %10s %10s %10s\n", "", "min", "max", "avg");
  s += buf;
  s += row("collisions", "collisions", "%.0f");
  s += row("mse [m]", "mse", "%.4f");
  s += row("eta", "eta", "%.4f");
  s += row("traversal time [s]", "traversal_time", "%.2f");
  s += row("replans", "replans", "%.0f");
  std::snprintf(buf, sizeof buf, "%-22s %10.1f%%  (%d/%d)\n", "success rate",
                100.0 * m.at("success_rate").get<double>(), m.at("successes").get<int>(), m.at("runs").get<int>());
  s += buf;
  return s;
}

int cmd_batch(const Common& c, int runs) {
  if (runs < 1) throw ConfigError("--runs must be at least 1");
  const Scenario base = load_scenario(c);
  const fs::path out = prepare_out(c.out);
  std::vector<RunResult> results;
  for (int i = 0; i < runs; ++i) {
    Scenario sc = base;
    sc.seed = base.seed + static_cast<uint64_t>(i);
    RunResult r;
    try {
      r = run_scenario(sc, progress(c.quiet, sc.name + "#" + std::to_string(sc.seed)));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      // The run is recorded as failed and the batch goes on.
      std::fprintf(stderr, "seed %llu: %s\n", static_cast<unsigned long long>(sc.seed), e.what());
      r.name = sc.name;
      r.seed = sc.seed;
      r.success = false;
    }
    write_run_csv(out / ("run_" + std::to_string(sc.seed) + ".csv"), r);
    if (!c.quiet) summary(r);
    results.push_back(std::move(r));
  }
  json m = aggregate_metrics(results, base.dt);
  m["scenario"] = base.name;
  m["seed"] = base.seed;
  write_text(out / "metrics.json", m.dump(2) + "\n");
  json t = aggregate_timing(results);
  t["scenario"] = base.name;
  t["seed"] = base.seed;
  write_text(out / "timing.json", t.dump(2) + "\n");
  std::cout << table(m);
  return m.at("successes").get<int>() == runs ? kOk : kNotReached;
}

std::string point(const Eigen::VectorXd& x) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "(%.6g,%.6g)", x(0), x(1));
  return buf;
}

int cmd_certify(const std::string& inner, const std::string& outer, int kmax, bool quiet) {
  SemialgebraicSet A, B;
  try {
    A = parse_set_spec(inner);
    B = parse_set_spec(outer);
  } catch (const SetSpecError& e) {
    throw ConfigError(e.what());
  }
  if (kmax < 1) throw ConfigError("--k must be at least 1");
  int top = A.max_degree();
  for (const auto& f : B.polys) top = std::max(top, f.degree());
  for (int k = std::max(1, (top + 1) / 2); k <= kmax; ++k) {
    const ContainmentReport rep = certify_all(B.polys, A, k);
    if (!quiet) {
      for (size_t i = 0; i < rep.faces.size(); ++i) {
        std::fprintf(stderr, "k=%d face %zu: %s (gamma %.3g)\n", k, i, to_string(rep.faces[i].status),
                     rep.faces[i].gamma);
      }
    }
    if (rep.certified) {
      std::printf("CERTIFIED k=%d\n", k);
      return kOk;
    }
  }
  for (const auto& f : B.polys) {
    if (const auto w = falsify(f, A)) {
      std::printf("WITNESS %s\n", point(*w).c_str());
      return kNotReached;
    }
  }
  std::printf("UNKNOWN\n");
  return kNotReached;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": bad integer '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

struct CapturedStep {
  TrackingObjective objective;
  FeasibleSet feasible;
  SemialgebraicSet robot;
  Polytope region;
  RegionCoefficients coefficients;
};

int cmd_sweep(const Common& c, int step, const std::string& ells_s, const std::string& ks_s) {
  Scenario sc = load_scenario(c);
  const auto ells = parse_int_list(ells_s, "--ells");
  const auto ks = parse_int_list(ks_s, "--ks");
  if (step < 0) throw ConfigError("--step must be non-negative");
  sc.max_steps = step + 1;
  std::optional<CapturedStep> cap;
  RunOptions o;
  o.on_program = [&](int s, const StepInstance& in) {
    if (s == step) cap = CapturedStep{in.objective, in.feasible, in.robot, in.region, in.coefficients};
  };
  run_scenario(sc, o);
  if (!cap) throw ConfigError("step " + std::to_string(step) + " has no region (goal reached or sensor blocked)");

  json j;
  j["scenario"] = sc.name;
  j["seed"] = sc.seed;
  j["step"] = step;
  j["k"] = sc.relax_k;
  j["ell"] = sc.relax_ell;
  const StepOptions sopt = step_options(sc);
  json h = json::array();
  for (const auto& [ell, v] :
       hierarchy_sweep(cap->objective, cap->feasible, cap->robot, cap->coefficients, sc.relax_k, ells, sopt.solver)) {
    h.push_back({{"ell", ell}, {"lower_bound", v}});
    std::printf("k=%d ell=%d  J_lower=%.10g\n", sc.relax_k, ell, v);
  }
  j["hierarchy"] = h;
  json ord = json::array();
  for (const auto& [k, r] : order_sweep(cap->objective, cap->feasible, cap->robot, cap->region, cap->coefficients, ks,
                                        sc.relax_ell, sopt)) {
    json e = {{"k", k}, {"status", to_string(r.status)}, {"lower_bound", r.lower_bound}};
    e["achieved"] = r.achieved ? json(*r.achieved) : json(nullptr);
    ord.push_back(e);
    std::printf("k=%d ell=%d  status=%s  achieved=%s\n", k, sc.relax_ell, to_string(r.status),
                r.achieved ? std::to_string(*r.achieved).c_str() : "none");
  }
  j["orders"] = ord;
  const fs::path out = prepare_out(c.out);
  write_text(out / "sweep.json", j.dump(2) + "\n");
  return kOk;
}

int cmd_export(const Common& c, int count) {
  Scenario sc = load_scenario(c);
  if (count < 1) throw ConfigError("--count must be at least 1");
  const fs::path out = prepare_out(c.out);
  const StepOptions sopt = step_options(sc);
  json list = json::array();
  int written = 0;
  struct Enough {};
  RunOptions o;
  o.on_program = [&](int step, const StepInstance& in) {
    const std::string file = "step_" + std::to_string(step) + ".dat-s";
    sdp::export_sdpa(in.program.problem, out / file);
    const sdp::ConicSolution sol = sdp::solve(in.program.problem, sopt.solver);
    list.push_back({{"file", file},
                    {"step", step},
                    {"status", sdp::to_string(sol.status)},
                    {"primal_objective", sol.primal_objective},
                    {"dual_objective", sol.dual_objective},
                    {"sdpa_objective", -sol.primal_objective}});
    if (++written == count) throw Enough{};
  };
  try {
    run_scenario(sc, o);
  } catch (const Enough&) {
  }
  json j;
  j["scenario"] = sc.name;
  j["seed"] = sc.seed;
  j["programs"] = list;
  write_text(out / "objectives.json", j.dump(2) + "\n");
  if (!c.quiet) std::fprintf(stderr, "wrote %d SDPA files to %s\n", written, out.string().c_str());
  return written == count ? kOk : kNotReached;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified screw-motion navigation toolkit"};
  app.require_subcommand(1);

  Common run_c, batch_c, sweep_c, export_c;
  auto* run = app.add_subcommand("run", "run one scenario");
  add_common(run, run_c);

  auto* batch = app.add_subcommand("batch", "run a scenario over consecutive seeds");
  add_common(batch, batch_c);
  int runs = 30;
  batch->add_option("--runs", runs, "number of seeds (seed, seed+1, ...)");

  auto* cert = app.add_subcommand("certify", "check containment of one set in another");
  std::string inner, outer;
  int kmax = 2;
  bool cert_quiet = false;
  cert->add_option("--inner", inner, "contained set, e.g. box:-0.5,-0.5,0.5,0.5 or ellipse:0.3,0.15")->required();
  cert->add_option("--outer", outer, "containing set")->required();
  cert->add_option("--k", kmax, "highest certificate order to try");
  cert->add_flag("--quiet", cert_quiet, "no per-face report");

  auto* sweep = app.add_subcommand("sweep", "re-solve one step over relaxation orders");
  add_common(sweep, sweep_c);
  int sweep_step = 0;
  std::string ells = "3,4", ks = "1,2";
  sweep->add_option("--step", sweep_step, "step whose program is swept");
  sweep->add_option("--ells", ells, "moment orders, comma separated");
  sweep->add_option("--ks", ks, "certificate orders, comma separated");

  auto* exp = app.add_subcommand("export-sdpa", "write the first step programs in SDPA sparse format");
  add_common(exp, export_c);
  int count = 5;
  exp->add_option("--count", count, "number of programs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*run) return cmd_run(run_c);
    if (*batch) return cmd_batch(batch_c, runs);
    if (*cert) return cmd_certify(inner, outer, kmax, cert_quiet);
    if (*sweep) return cmd_sweep(sweep_c, sweep_step, ells, ks);
    if (*exp) return cmd_export(export_c, count);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  return kConfigError;
}
