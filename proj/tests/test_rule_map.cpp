#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "pcpbo/cem.hpp"
#include "pcpbo/rule_map.hpp"
#include "pcpbo/settle.hpp"
#include "support/fixtures.hpp"

using namespace pcpbo;

TEST(RuleMap, TaroYawBounds) {
  const auto& t = shipped_task("taro");
  const auto& r = t.rule.items[0];
  EXPECT_NEAR(rule_target(WeightVector({0.0}), t).find(3)->pose.yaw, r.yaw_min, 1e-12);
  EXPECT_NEAR(rule_target(WeightVector({1.0}), t).find(3)->pose.yaw, r.yaw_max, 1e-12);
}

TEST(RuleMap, ShrimpUserOptimumFollowsRules) {
  const auto& t = shipped_task("shrimp");
  const auto s = rule_target(WeightVector({0.2, 0.6}), t);
  EXPECT_EQ(rule_violations(s, t), 0);
  const auto& r = t.rule.items;
  EXPECT_NEAR(s.find(r[0].item)->pose.yaw, r[0].yaw_min + 0.2 * (r[0].yaw_max - r[0].yaw_min), 1e-12);
  EXPECT_NEAR(s.find(r[1].item)->pose.yaw, r[1].yaw_min + 0.6 * (r[1].yaw_max - r[1].yaw_min), 1e-12);
  // leaning items sit below the top of what they lean on
  for (const auto& ri : r) EXPECT_LT(s.find(ri.item)->pose.z, top_height(*s.find(ri.lean_target)));
}

TEST(RuleMap, ReferenceActionsProjectTarget) {
  for (const char* name : {"taro", "shrimp", "tempura"}) {
    const auto& t = shipped_task(name);
    const auto grid = t.grid();
    for (std::size_t i = 0; i < grid.size(); i += 37) {
      const auto w = grid.point(i);
      const auto target = rule_target(w, t);
      const auto acts = reference_actions(w, t);
      ASSERT_EQ(static_cast<int>(acts.size()), t.movable_count());
      for (int k = 0; k < t.movable_count(); ++k) {
        const auto& p = target.find(t.movable_order[k])->pose;
        EXPECT_EQ(acts[k], (PlacementAction{p.x, p.y, p.yaw}));
      }
    }
  }
  EXPECT_EQ(reference_actions(WeightVector({0.5}), shipped_task("taro")).size(), 1u);
  EXPECT_EQ(reference_actions(WeightVector({0.5, 0.5, 0.5}), shipped_task("tempura")).size(), 3u);
}

TEST(RuleMap, DimensionMismatch) {
  EXPECT_THROW(rule_target(WeightVector({0.5, 0.5}), shipped_task("taro")), std::invalid_argument);
  EXPECT_THROW(reference_actions(WeightVector({0.5}), shipped_task("shrimp")), std::invalid_argument);
}

TEST(RuleMap, ShippedTemplatesValidate) {
  for (const char* name : {"taro", "shrimp", "tempura"}) {
    const auto rep = validate_template(shipped_task(name));
    EXPECT_TRUE(rep.ok()) << name << ": " << (rep.failures.empty() ? "" : rep.failures.front());
    EXPECT_GT(rep.min_gap, 1e-9);
    EXPECT_LT(rep.lipschitz, 10.0);
  }
}

TEST(RuleMap, DistinctGridPointsGiveDistinctActions) {
  const auto& t = shipped_task("shrimp");
  const auto grid = t.grid();
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<double> key;
    for (const auto& a : reference_actions(grid.point(i), t)) key.insert(key.end(), {a.x, a.y, a.yaw});
    EXPECT_TRUE(seen.insert(key).second) << "grid point " << i;
  }
}

TEST(RuleMap, TargetIsZeroCost) {
  const auto& t = shipped_task("tempura");
  const WeightVector w({0.3, 0.8, 0.1});
  EXPECT_DOUBLE_EQ(arrangement_cost(rule_target(w, t), w, t), 0.0);
}

TEST(RuleMap, SteepYawNaiveExecutionCollapses) {
  // the reference placement holds in the middle of the range and fails at the ends
  const auto& t = shipped_task("taro");
  for (double w : {0.0, 1.0}) {
    const auto s = rollout(t, t.initial, reference_actions(WeightVector({w}), t));
    EXPECT_EQ(rule_violations(s, t), 1) << "w = " << w;
  }
  const auto mid = rollout(t, t.initial, reference_actions(WeightVector({0.5}), t));
  EXPECT_EQ(rule_violations(mid, t), 0);
}

TEST(RuleMap, ViolationsRejectOtherTasks) {
  EXPECT_THROW(rule_violations(shipped_task("taro").initial, shipped_task("shrimp")), std::invalid_argument);
}
