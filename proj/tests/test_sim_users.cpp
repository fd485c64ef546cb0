#include <gtest/gtest.h>

#include "pcpbo/cem.hpp"
#include "pcpbo/rule_map.hpp"
#include "pcpbo/settle.hpp"
#include "pcpbo/sim_users.hpp"
#include "support/fixtures.hpp"

using namespace pcpbo;

TEST(SimUsers, IdealAnswer) {
  EXPECT_EQ(ideal_answer(5.0, 5.0), 0);
  EXPECT_EQ(ideal_answer(3.0, 7.0), 1);
  EXPECT_EQ(ideal_answer(7.0, 3.0), 0);
  for (double a : {0.0, 12.5, 60.0})
    for (double b : {1.0, 40.0, 99.0})
      if (a != b) EXPECT_EQ(ideal_answer(a, b), 1 - ideal_answer(b, a));
}

TEST(SimUsers, PreferenceValueArithmetic) {
  PreferenceModel m;
  m.w_star = WeightVector({0.5});
  EXPECT_DOUBLE_EQ(preference_value(0.0, 0, m), 100.0);
  EXPECT_DOUBLE_EQ(preference_value(0.0, 1, m), 60.0);
  EXPECT_DOUBLE_EQ(preference_value(10.0, 0, m), 0.0);
  double last = 100.0;
  for (double d = 0.0; d < 1.0; d += 0.01) {
    const double c = preference_value(d, 0, m);
    EXPECT_LE(c, last);
    EXPECT_GE(c, 0.0);
    last = c;
  }
}

TEST(SimUsers, TargetScoresFull) {
  const auto& t = shipped_task("shrimp");
  PreferenceModel m;
  m.w_star = WeightVector({0.2, 0.6});
  EXPECT_DOUBLE_EQ(preference_value(rule_target(m.w_star, t), m, t), 100.0);
}

TEST(SimUsers, ValueDropsAlongARay) {
  const auto& t = shipped_task("taro");
  PreferenceModel m;
  m.w_star = WeightVector({0.5});
  auto s = rule_target(m.w_star, t);
  double last = preference_value(s, m, t);
  for (int k = 0; k < 20; ++k) {
    s.find(3)->pose.x -= 0.002;
    const double c = preference_value(s, m, t);
    EXPECT_LE(c, last);
    last = c;
  }
}

TEST(SimUsers, UncertainBranches) {
  UncertainConfig cfg;
  Rng rng(1);
  EXPECT_EQ(uncertain_answer(5.0, 12.0, cfg, rng), std::optional<int>(1));
  UncertainConfig wide{20.0, 100.0, true};
  EXPECT_EQ(uncertain_answer(120.0, 110.0, wide, rng), std::nullopt);
  wide.skip_enabled = false;
  for (int k = 0; k < 50; ++k) EXPECT_TRUE(uncertain_answer(120.0, 110.0, wide, rng).has_value());
}

TEST(SimUsers, MiddleBandProbability) {
  UncertainConfig cfg{20.0, 50.0, true};
  Rng rng(77);
  int skips = 0;
  const int n = 10000;
  for (int k = 0; k < n; ++k)
    if (!uncertain_answer(35.0, 80.0, cfg, rng)) ++skips;
  EXPECT_NEAR(static_cast<double>(skips) / n, 0.5, 0.02);
}

TEST(SimUsers, DegeneratesToIdeal) {
  UncertainConfig cfg{1e9, 2e9, true};
  Rng rng(3);
  for (double a : {0.0, 30.0, 70.0, 100.0})
    for (double b : {10.0, 50.0, 90.0}) EXPECT_EQ(uncertain_answer(a, b, cfg, rng), ideal_answer(a, b));
}

TEST(SimUsers, RejectsBadConfig) {
  Rng rng(1);
  EXPECT_THROW(uncertain_answer(1.0, 2.0, UncertainConfig{50.0, 20.0, true}, rng), ConfigError);
}

TEST(SimUsers, IdealUserOrderingPeaksAtTarget) {
  // over planned states, the grid point nearest w* is the unique best
  const auto& t = shipped_task("taro");
  const auto grid = t.grid();
  auto cache = shared_cache();
  for (double ws : {0.1, 0.5, 0.9}) {
    PreferenceModel m;
    m.w_star = WeightVector({ws});
    std::vector<double> c;
    for (std::size_t i = 0; i < grid.size(); ++i) c.push_back(preference_value(cache->best(t, i)->best_state, m, t));
    const std::size_t want = grid.nearest(m.w_star);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (i != want) EXPECT_LT(c[i], c[want]) << "w* " << ws << " point " << i;
  }
}

TEST(SimUsers, SimulatedUserIsDeterministic) {
  const auto& t = shipped_task("taro");
  PreferenceModel m;
  m.w_star = WeightVector({0.1});
  const auto a = rule_target(WeightVector({0.1}), t);
  const auto b = rule_target(WeightVector({0.6}), t);
  SimulatedUser ideal(t, m, std::nullopt, 1);
  EXPECT_EQ(ideal.answer(a, b), Choice::left);
  EXPECT_EQ(ideal.answer(b, a), Choice::right);
  SimulatedUser u1(t, m, UncertainConfig{}, 5), u2(t, m, UncertainConfig{}, 5);
  for (int k = 0; k < 30; ++k) EXPECT_EQ(u1.answer(a, b), u2.answer(a, b));
}
