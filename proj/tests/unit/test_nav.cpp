#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "screwcert/nav.hpp"

using namespace screwcert;

namespace {

Scenario load(const std::string& name) {
  return Scenario::load(std::filesystem::path(SCREWCERT_SCENARIO_DIR) / name);
}

struct CsvRow {
  double x, y, yaw, w, vx, vy;
};

std::vector<CsvRow> parse_rows(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);  // header
  std::vector<CsvRow> rows;
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    rows.push_back({std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6]),
                    std::stod(f[7])});
  }
  return rows;
}

double angle_diff(double a, double b) { return std::remainder(a - b, 2.0 * std::numbers::pi); }

}  // namespace

class EmptyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scenario_ = new Scenario(load("empty.toml"));
    result_ = new RunResult(run_scenario(*scenario_));
  }
  static void TearDownTestSuite() {
    delete result_;
    delete scenario_;
  }
  static Scenario* scenario_;
  static RunResult* result_;
};
Scenario* EmptyRun::scenario_ = nullptr;
RunResult* EmptyRun::result_ = nullptr;

TEST_F(EmptyRun, ReachesGoalWithoutCollision) {
  EXPECT_TRUE(result_->success);
  EXPECT_EQ(result_->collisions, 0);
  EXPECT_LE(result_->final_distance, scenario_->goal_tolerance);
  for (const auto& s : result_->steps) EXPECT_GE(s.margin, 0.0);
}

// Replaying the logged controls through the exponential map reproduces the
// logged poses.
TEST_F(EmptyRun, CsvPoseChainReplays) {
  std::ostringstream os;
  write_csv(*result_, os);
  const auto rows = parse_rows(os.str());
  ASSERT_EQ(rows.size(), result_->steps.size());
  ASSERT_GE(rows.size(), 2u);
  for (size_t k = 0; k + 1 < rows.size(); ++k) {
    const CsvRow& r = rows[k];
    const Pose next = compose(Pose::planar(r.x, r.y, r.yaw),
                              exp_map(ScrewControl::planar_control(r.w, r.vx, r.vy), scenario_->theta_step));
    EXPECT_NEAR(next.p.x(), rows[k + 1].x, 1e-9) << k;
    EXPECT_NEAR(next.p.y(), rows[k + 1].y, 1e-9) << k;
    EXPECT_NEAR(angle_diff(next.yaw(), rows[k + 1].yaw), 0.0, 1e-9) << k;
  }
}

TEST_F(EmptyRun, ControlsAreAdmissible) {
  const FeasibleSet G = FeasibleSet::make(true, scenario_->v_limit);
  for (const auto& s : result_->steps) {
    EXPECT_TRUE(G.contains(ScrewControl::planar_control(s.w, s.vx, s.vy), 1e-6)) << s.step;
  }
}

TEST_F(EmptyRun, MetricsAreDeterministicAndParse) {
  const RunResult again = run_scenario(*scenario_);
  const std::string a = result_->metrics(scenario_->dt).dump(2);
  EXPECT_EQ(a, again.metrics(scenario_->dt).dump(2));
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["steps"].get<size_t>(), result_->steps.size());
  EXPECT_NEAR(j["eta"].get<double>(), result_->eta(), 0.0);
  EXPECT_GE(j["eta"].get<double>(), 1.0 - 1e-12);
}

TEST_F(EmptyRun, AggregateOfOneRun) {
  const auto agg = aggregate_metrics({*result_}, scenario_->dt);
  EXPECT_EQ(agg["runs"].get<int>(), 1);
  EXPECT_DOUBLE_EQ(agg["success_rate"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(agg["mse"]["min"].get<double>(), result_->mse());
  EXPECT_DOUBLE_EQ(agg["mse"]["max"].get<double>(), result_->mse());
}

TEST(Metrics, EtaAndMseDefinitions) {
  RunResult r;
  r.start = Eigen::Vector3d(0, 0, 0);
  r.goal = Eigen::Vector2d(3, 4);
  r.path_length = 6.0;
  r.final_distance = 1.5;
  EXPECT_DOUBLE_EQ(r.eta(), 1.5);
  StepLog a, b;
  a.cross_track = 0.3;
  b.cross_track = 0.4;
  r.steps = {a, b};
  EXPECT_DOUBLE_EQ(r.mse(), std::sqrt(0.125));
  EXPECT_DOUBLE_EQ(r.traversal_time(0.02), 0.04);
}
