#pragma once

// Scenario files: flat `key = value` lines (a TOML subset). Values are
// numbers, booleans, "quoted strings" or [comma, separated, numbers].
// Dotted keys group related settings; '#' starts a comment. Every key must
// appear in the schema below, and unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace screwcert {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  std::string name = "scenario";
  std::string map = "empty";  // empty | lturn | forest | file
  std::string grid_file;      // resolved path when map = file
  double resolution = 0.05;

  double empty_length = 4.0;
  double empty_width = 2.0;

  double lturn_leg_x = 3.5;
  double lturn_leg_y = 3.0;
  double lturn_width = 0.0;  // 0: sized from the robot

  double forest_length = 8.0;
  double forest_width = 3.0;
  double forest_r_min = 0.06;
  double forest_r_max = 0.16;
  double forest_min_gap = 0.4;
  double forest_spacing_start = 1.0;  // extra clearance at x = 0
  double forest_spacing_end = 0.4;    // extra clearance at x = length
  double forest_clear_radius = 0.6;   // obstacle-free disc around start and goal

  bool start_set = false;
  bool goal_set = false;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();  // x, y, yaw
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();

  std::string shape = "hexagon";
  std::vector<double> shape_params{0.2};

  double v_limit = 0.5;
  double theta_step = 0.2;
  double dt = 0.02;
  Eigen::Vector3d q_p{5.0, 2.0, 0.0};
  std::vector<double> q_r = std::vector<double>(9, 0.1);

  double sensor_range = 1.0;
  int max_steps = 1500;
  double lookahead = 0.8;
  double goal_tolerance = 0.1;
  double region_margin = 1e-3;
  double plan_inflation = 0.0;  // 0: half the robot width plus 0.06 m
  int stall_steps = 5;          // null-motion steps before the blocking spot is marked

  int relax_k = 1;
  int relax_ell = 3;
  bool relax_ball = true;
  double rank_tol = 1e-6;
  int bisection_iterations = 20;

  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iter = 200;

  uint64_t seed = 1;

  /// Sets one key from its textual value. Throws ConfigError on unknown keys
  /// or malformed values. `base_dir` resolves relative file paths.
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir = {});

  /// Keys accepted by set(), in schema order.
  static std::vector<std::string> keys();

  void validate() const;

  static Scenario parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static Scenario load(const std::filesystem::path& path);
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t.empty()) throw ConfigError("key '" + key + "': empty value");
  size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not a number: " + t);
  }
  if (used != t.size() || !std::isfinite(d)) throw ConfigError("key '" + key + "': not a number: " + t);
  return d;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  const double d = parse_number(key, v);
  if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError("key '" + key + "': expected an integer");
  return static_cast<long long>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true") return true;
  if (t == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false");
}

/// Accepts "quoted" or bare text (bare form is convenient on the command line).
inline std::string parse_string(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return t.substr(1, t.size() - 2);
  if (t.empty() || t.find('"') != std::string::npos) throw ConfigError("key '" + key + "': malformed string");
  return t;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::string t = trim(v);
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
  std::vector<double> out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_number(key, item));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

inline std::vector<double> parse_list_n(const std::string& key, const std::string& v, size_t n) {
  auto out = parse_list(key, v);
  if (out.size() != n) {
    throw ConfigError("key '" + key + "': expected " + std::to_string(n) + " numbers, got " +
                      std::to_string(out.size()));
  }
  return out;
}

using Setter = std::function<void(Scenario&, const std::string&, const std::filesystem::path&)>;

inline const std::vector<std::pair<std::string, Setter>>& schema() {
  using P = std::filesystem::path;
  static const std::vector<std::pair<std::string, Setter>> table = [] {
    std::vector<std::pair<std::string, Setter>> t;
    auto num = [&t](const char* key, double Scenario::*field) {
      t.emplace_back(key, [key, field](Scenario& s, const std::string& v, const P&) {
        s.*field = parse_number(key, v);
      });
    };
    auto integer = [&t](const char* key, int Scenario::*field) {
      t.emplace_back(key, [key, field](Scenario& s, const std::string& v, const P&) {
        s.*field = static_cast<int>(parse_integer(key, v));
      });
    };
    t.emplace_back("name", [](Scenario& s, const std::string& v, const P&) { s.name = parse_string("name", v); });
    t.emplace_back("map", [](Scenario& s, const std::string& v, const P&) {
      s.map = parse_string("map", v);
      if (s.map != "empty" && s.map != "lturn" && s.map != "forest" && s.map != "file") {
        throw ConfigError("key 'map': expected empty, lturn, forest or file");
      }
    });
    t.emplace_back("grid.file", [](Scenario& s, const std::string& v, const P& base) {
      P p = parse_string("grid.file", v);
      if (p.is_relative() && !base.empty()) p = base / p;
      s.grid_file = p.string();
    });
    num("grid.resolution", &Scenario::resolution);
    t.emplace_back("start", [](Scenario& s, const std::string& v, const P&) {
      const auto l = parse_list_n("start", v, 3);
      s.start = Eigen::Vector3d(l[0], l[1], l[2]);
      s.start_set = true;
    });
    t.emplace_back("goal", [](Scenario& s, const std::string& v, const P&) {
      const auto l = parse_list_n("goal", v, 2);
      s.goal = Eigen::Vector2d(l[0], l[1]);
      s.goal_set = true;
    });
    t.emplace_back("robot.shape", [](Scenario& s, const std::string& v, const P&) {
      s.shape = parse_string("robot.shape", v);
    });
    t.emplace_back("robot.params", [](Scenario& s, const std::string& v, const P&) {
      s.shape_params = parse_list("robot.params", v);
    });
    num("control.v_limit", &Scenario::v_limit);
    num("control.theta_step", &Scenario::theta_step);
    num("control.dt", &Scenario::dt);
    t.emplace_back("cost.q_p", [](Scenario& s, const std::string& v, const P&) {
      const auto l = parse_list_n("cost.q_p", v, 3);
      s.q_p = Eigen::Vector3d(l[0], l[1], l[2]);
    });
    t.emplace_back("cost.q_r", [](Scenario& s, const std::string& v, const P&) {
      auto l = parse_list("cost.q_r", v);
      if (l.size() == 1) l.assign(9, l[0]);
      if (l.size() != 9) throw ConfigError("key 'cost.q_r': expected 1 or 9 numbers");
      s.q_r = l;
    });
    num("sensor.range", &Scenario::sensor_range);
    integer("nav.max_steps", &Scenario::max_steps);
    num("nav.lookahead", &Scenario::lookahead);
    num("nav.goal_tolerance", &Scenario::goal_tolerance);
    num("nav.region_margin", &Scenario::region_margin);
    num("nav.plan_inflation", &Scenario::plan_inflation);
    integer("nav.stall_steps", &Scenario::stall_steps);
    integer("relax.k", &Scenario::relax_k);
    integer("relax.ell", &Scenario::relax_ell);
    t.emplace_back("relax.ball", [](Scenario& s, const std::string& v, const P&) {
      s.relax_ball = parse_bool("relax.ball", v);
    });
    num("relax.rank_tol", &Scenario::rank_tol);
    integer("relax.bisection_iterations", &Scenario::bisection_iterations);
    num("solver.feas_tol", &Scenario::feas_tol);
    num("solver.gap_tol", &Scenario::gap_tol);
    integer("solver.max_iter", &Scenario::max_iter);
    t.emplace_back("seed", [](Scenario& s, const std::string& v, const P&) {
      const long long x = parse_integer("seed", v);
      if (x < 0) throw ConfigError("key 'seed': must be >= 0");
      s.seed = static_cast<uint64_t>(x);
    });
    num("empty.length", &Scenario::empty_length);
    num("empty.width", &Scenario::empty_width);
    num("lturn.leg_x", &Scenario::lturn_leg_x);
    num("lturn.leg_y", &Scenario::lturn_leg_y);
    num("lturn.width", &Scenario::lturn_width);
    num("forest.length", &Scenario::forest_length);
    num("forest.width", &Scenario::forest_width);
    num("forest.r_min", &Scenario::forest_r_min);
    num("forest.r_max", &Scenario::forest_r_max);
    num("forest.min_gap", &Scenario::forest_min_gap);
    num("forest.spacing_start", &Scenario::forest_spacing_start);
    num("forest.spacing_end", &Scenario::forest_spacing_end);
    num("forest.clear_radius", &Scenario::forest_clear_radius);
    return t;
  }();
  return table;
}

}  // namespace detail

inline void Scenario::set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir) {
  for (const auto& [k, fn] : detail::schema()) {
    if (k == key) {
      fn(*this, value, base_dir);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

inline std::vector<std::string> Scenario::keys() {
  std::vector<std::string> out;
  for (const auto& [k, fn] : detail::schema()) out.push_back(k);
  return out;
}

inline void Scenario::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be > 0");
  };
  positive(resolution, "grid.resolution");
  positive(v_limit, "control.v_limit");
  positive(theta_step, "control.theta_step");
  positive(dt, "control.dt");
  positive(sensor_range, "sensor.range");
  positive(lookahead, "nav.lookahead");
  positive(goal_tolerance, "nav.goal_tolerance");
  if (region_margin < 0.0) throw ConfigError("nav.region_margin must be >= 0");
  if (plan_inflation < 0.0) throw ConfigError("nav.plan_inflation must be >= 0");
  if (max_steps < 1) throw ConfigError("nav.max_steps must be >= 1");
  if (stall_steps < 1) throw ConfigError("nav.stall_steps must be >= 1");
  if (relax_k < 1 || relax_k > 3) throw ConfigError("relax.k must be in 1..3");
  if (relax_ell < 3 || relax_ell > 5) throw ConfigError("relax.ell must be in 3..5");
  if (bisection_iterations < 0) throw ConfigError("relax.bisection_iterations must be >= 0");
  if (max_iter < 1) throw ConfigError("solver.max_iter must be >= 1");
  if (q_p.minCoeff() < 0.0) throw ConfigError("cost.q_p entries must be >= 0");
  for (double q : q_r) {
    if (q < 0.0) throw ConfigError("cost.q_r entries must be >= 0");
  }
  if (map == "file" && grid_file.empty()) throw ConfigError("map = file requires grid.file");
  if (map == "file" && (!start_set || !goal_set)) throw ConfigError("map = file requires start and goal");
  if (forest_r_min <= 0.0 || forest_r_max < forest_r_min) throw ConfigError("forest radii are inconsistent");
  if (forest_min_gap <= 0.0) throw ConfigError("forest.min_gap must be > 0");
}

inline Scenario Scenario::parse(const std::string& text, const std::filesystem::path& base_dir) {
  Scenario s;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // Strip comments outside quotes.
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    try {
      s.set(key, line.substr(eq + 1), base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return s;
}

inline Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.parent_path());
}

}  // namespace screwcert
