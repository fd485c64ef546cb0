#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include <fmt/core.h>
#include <gtest/gtest.h>

#include "pcpbo/cem.hpp"
#include "pcpbo/rule_map.hpp"
#include "pcpbo/settle.hpp"
#include "support/fixtures.hpp"

using namespace pcpbo;
namespace fs = std::filesystem;

namespace {

CemConfig small_cfg(int iterations = 20) {
  CemConfig c;
  c.population = 32;
  c.elite_fraction = 0.25;
  c.iterations = iterations;
  c.min_std = 1e-4;
  return c;
}

BatchCost quadratic(double target) {
  return [target](const std::vector<Eigen::VectorXd>& xs) {
    std::vector<double> out;
    for (const auto& x : xs) out.push_back((x[0] - target) * (x[0] - target));
    return out;
  };
}

}  // namespace

TEST(Cem, QuadraticSurrogate) {
  Eigen::VectorXd mean(1), std0(1), lo(1), hi(1);
  mean << 0.0;
  std0 << 0.5;
  lo << -2.0;
  hi << 2.0;
  const auto out = cem_minimize(quadratic(0.7), mean, std0, lo, hi, small_cfg(), 4);
  EXPECT_NEAR(out.best[0], 0.7, 1e-2);
  for (std::size_t k = 1; k < out.cost_trace.size(); ++k) EXPECT_LE(out.cost_trace[k], out.cost_trace[k - 1]);
}

TEST(Cem, DegenerateSpreadKeepsOptimum) {
  Eigen::VectorXd mean(1), std0(1), lo(1), hi(1);
  mean << 0.7;
  std0 << 1e-12;
  lo << -2.0;
  hi << 2.0;
  auto cfg = small_cfg();
  cfg.min_std = 1e-12;
  const auto out = cem_minimize(quadratic(0.7), mean, std0, lo, hi, cfg, 4);
  EXPECT_DOUBLE_EQ(out.best[0], 0.7);
  EXPECT_DOUBLE_EQ(out.best_cost, 0.0);
}

TEST(Cem, AllInvalidThrows) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2), std0 = Eigen::VectorXd::Ones(2);
  Eigen::VectorXd lo = -std0, hi = std0;
  BatchCost bad = [](const std::vector<Eigen::VectorXd>& xs) {
    return std::vector<double>(xs.size(), std::numeric_limits<double>::infinity());
  };
  try {
    cem_minimize(bad, mean, std0, lo, hi, small_cfg(3), 1);
    FAIL() << "expected PlanningError";
  } catch (const PlanningError& e) {
    EXPECT_FALSE(e.diagnostics().empty());
  }
}

TEST(Cem, StateDistanceArithmetic) {
  const auto& t = shipped_task("taro");
  const auto a = rollout(t, t.initial, std::vector<PlacementAction>{{-0.05, 0.0, 0.2}});
  auto b = a;
  b.find(3)->pose.x += 0.03;
  b.find(3)->pose.y += 0.04;
  EXPECT_NEAR(state_distance(a, b), 0.05 * kPositionWeight, 1e-12);
  // angle residuals wrap
  auto c = a;
  c.find(3)->pose.yaw += 2 * kPi;
  EXPECT_NEAR(state_distance(a, c), 0.0, 1e-12);
  auto d = a;
  d.find(3)->pose.yaw += 0.5;
  EXPECT_NEAR(state_distance(a, d), 0.5 * kAngleWeight, 1e-12);
  EXPECT_THROW(state_distance(a, shipped_task("shrimp").initial), std::invalid_argument);
}

TEST(Cem, CostIgnoresSharedFixedItems) {
  const auto& t = shipped_task("shrimp");
  const WeightVector w({0.4, 0.7});
  EXPECT_DOUBLE_EQ(arrangement_cost(rule_target(w, t), w, t), 0.0);
  EXPECT_THROW(arrangement_cost(shipped_task("taro").initial, w, t), std::invalid_argument);
}

TEST(Cem, PlanIsDeterministicAndNoWorseThanNaive) {
  const auto& t = shipped_task("taro");
  const auto grid = t.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto w = grid.point(i);
    const auto a = plan(t, t.initial, w, t.cem, 5);
    const auto b = plan(t, t.initial, w, t.cem, 5);
    EXPECT_EQ(a.best_state, b.best_state);
    EXPECT_EQ(a.best_actions, b.best_actions);
    EXPECT_EQ(a.cost_trace, b.cost_trace);
    const double naive = arrangement_cost(rollout(t, t.initial, reference_actions(w, t)), w, t);
    EXPECT_LE(a.best_cost, naive) << "grid point " << i;
    EXPECT_TRUE(check_invariants(a.best_state).ok(1e-4));
    for (std::size_t k = 1; k < a.cost_trace.size(); ++k) EXPECT_LE(a.cost_trace[k], a.cost_trace[k - 1]);
  }
}

TEST(Cem, PlanFixesTopplingEnds) {
  const auto& t = shipped_task("taro");
  for (double w : {0.0, 1.0}) {
    const auto r = plan(t, t.initial, WeightVector({w}), t.cem, t.cem.seed);
    EXPECT_EQ(rule_violations(r.best_state, t), 0) << "w = " << w;
  }
}

TEST(Cem, RestartSeeds) {
  const auto& cfg = shipped_task("taro").cem;
  EXPECT_EQ(restart_seed(cfg, 0), cfg.seed);
  EXPECT_NE(restart_seed(cfg, 1), restart_seed(cfg, 2));
}

TEST(Cem, PlanRecordRoundTrip) {
  const auto& t = shipped_task("shrimp");
  const auto r = plan(t, t.initial, WeightVector({0.2, 0.6}), t.cem, 9);
  std::stringstream ss;
  write_plan_record(ss, t.task_id, 92, r);
  const auto back = read_plan_record(ss, t);
  EXPECT_EQ(back.best_actions, r.best_actions);
  EXPECT_EQ(back.best_state, r.best_state);
  EXPECT_EQ(back.best_cost, r.best_cost);
  EXPECT_EQ(back.seed, r.seed);
  std::stringstream other;
  write_plan_record(other, "taro", 0, r);
  EXPECT_THROW(read_plan_record(other, t), ConfigError);
}

TEST(Cem, DiskCacheReloads) {
  const auto dir = fs::temp_directory_path() / "pcpbo_cache_test";
  fs::remove_all(dir);
  const auto& t = shipped_task("taro");
  std::shared_ptr<const PlanResult> first;
  {
    PlanCache c(dir.string());
    first = c.best(t, 7);
    EXPECT_EQ(c.computed(), static_cast<std::size_t>(t.cem.restarts));
    EXPECT_EQ(c.best(t, 7), first);  // memoized
    EXPECT_EQ(c.computed(), static_cast<std::size_t>(t.cem.restarts));
  }
  EXPECT_TRUE(fs::exists(dir / "taro" / fmt::format("g7_s{}.txt", t.cem.seed)));
  PlanCache again(dir.string());
  const auto second = again.best(t, 7);
  EXPECT_EQ(again.computed(), 0u);
  EXPECT_EQ(again.loaded(), static_cast<std::size_t>(t.cem.restarts));
  EXPECT_EQ(second->best_state, first->best_state);
  fs::remove_all(dir);
}

TEST(Cem, BestRestartIsLowestCost) {
  const auto& t = shipped_task("taro");
  auto cache = shared_cache();
  const auto all = cache->restarts(t, 3);
  ASSERT_EQ(static_cast<int>(all.size()), t.cem.restarts);
  const auto best = cache->best(t, 3);
  for (const auto& r : all) EXPECT_LE(best->best_cost, r->best_cost);
}
