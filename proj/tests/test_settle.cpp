#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pcpbo/geometry.hpp"
#include "pcpbo/settle.hpp"
#include "support/fixtures.hpp"
#include "support/mini_task.hpp"

using namespace pcpbo;

namespace {

std::vector<PlacementAction> random_actions(const TaskDefinition& t, std::mt19937_64& rng) {
  std::vector<PlacementAction> u;
  for (int id : t.movable_order) {
    const auto& b = t.bounds_for(id);
    std::uniform_real_distribution<double> x(b.x_min, b.x_max), y(b.y_min, b.y_max), yaw(b.yaw_min, b.yaw_max);
    // keep drops on the plate
    double px, py;
    do {
      px = x(rng);
      py = y(rng);
    } while (std::hypot(px, py) > 0.09);
    u.push_back({px, py, yaw(rng)});
  }
  return u;
}

}  // namespace

TEST(Settle, DropHeightEmptyPlate) {
  auto t = mini_task();
  SceneState empty;
  empty.task_id = t.task_id;
  ItemSpec item{7, "cube", 0.01, 0.01, 0.04};
  EXPECT_NEAR(drop_height(empty, item, 0.05, 0.05, 0.0, t.settle, t.plate_radius), 0.022, 1e-12);
  SettleConfig tight = t.settle;
  tight.clearance = 0.0;
  EXPECT_NEAR(drop_height(empty, item, 0.05, 0.05, 0.0, tight, t.plate_radius), 0.02, 1e-12);
}

TEST(Settle, DropHeightOverPriorItem) {
  auto t = mini_task(0.03, 0.03, 0.05);
  ItemSpec item{7, "cube", 0.01, 0.01, 0.02};
  EXPECT_NEAR(drop_height(t.initial, item, 0.0, 0.0, 0.3, t.settle, t.plate_radius), 0.05 + 0.01 + 0.002, 1e-12);
}

TEST(Settle, DropOffPlateThrows) {
  auto t = mini_task();
  ItemSpec item{7, "cube", 0.01, 0.01, 0.02};
  EXPECT_THROW(drop_height(t.initial, item, 0.5, 0.5, 0.0, t.settle, t.plate_radius), PlacementError);
}

TEST(Settle, FlatOnEmptyPlate) {
  auto t = shipped_task("taro");
  SceneState empty;
  empty.task_id = t.task_id;
  const auto s = step(t, empty, {-0.05, -0.02, 0.3});
  const auto& p = s.find(3)->pose;
  const Pose want{-0.05, -0.02, t.item(3).height / 2, 0, 0, 0.3};
  EXPECT_EQ(p, want);
  EXPECT_EQ(s.stage, 1);
}

TEST(Settle, LeanMatchesContactGeometry) {
  auto t = mini_task();
  const auto s = step(t, t.initial, {0.03, 0.0, 0.0});
  const auto& it = *s.find(1);
  ASSERT_GT(std::abs(it.pose.pitch), 0.1);
  ASSERT_LE(std::abs(it.pose.pitch), t.settle.tip_angle);

  // low bottom corner on the plate, bottom face through the block's top edge
  const auto box = geom::box_of(it.spec, it.pose);
  const geom::Vec3 n = box.rot.col(2);
  const geom::Vec3 low = box.center + box.rot * geom::Vec3(box.half.x(), 0, -box.half.z());
  EXPECT_NEAR(low.z(), 0.0, 1e-6);
  const geom::Vec3 edge(0.02, 0.0, 0.03);
  EXPECT_NEAR(n.dot(edge - (box.center - n * box.half.z())), 0.0, 1e-6);
  EXPECT_NEAR(std::abs(it.pose.pitch), std::atan2(0.03, low.x() - 0.02), 1e-6);
  EXPECT_TRUE(check_invariants(s).ok(1e-4));
}

TEST(Settle, UnsupportedItemTopples) {
  auto t = mini_task();
  const PlacementAction a{0.045, 0.0, 0.0};  // only 0.005 of 0.06 over the block
  const auto s = step(t, t.initial, a);
  const auto& p = s.find(1)->pose;
  EXPECT_TRUE(rests_flat(p));
  EXPECT_NEAR(p.z, 0.005, 1e-9);  // on the plate
  EXPECT_NE(p.x, a.x);
  EXPECT_TRUE(check_invariants(s).ok(1e-4));
}

TEST(Settle, TallItemToppleOntoSide) {
  auto t = mini_task(0.02, 0.03, 0.03, 0.02, 0.005, 0.03);
  const auto s = step(t, t.initial, {0.03, 0.0, 0.0});
  const auto& p = s.find(1)->pose;
  EXPECT_NEAR(std::abs(p.roll), kPi / 2, 1e-9);
  EXPECT_NEAR(p.z, 0.005, 1e-9);
}

TEST(Settle, StepErrors) {
  auto t = shipped_task("taro");
  EXPECT_THROW(step(t, t.initial, {0.5, 0.0, 0.0}), PlacementError);
  EXPECT_THROW(step(t, t.initial, {NAN, 0.0, 0.0}), PlacementError);
  const auto s = step(t, t.initial, {-0.05, 0.0, 0.0});
  EXPECT_THROW(step(t, s, {-0.05, 0.0, 0.0}), std::invalid_argument);
}

TEST(Settle, StepDoesNotMutateInput) {
  auto t = shipped_task("shrimp");
  const SceneState before = t.initial;
  SceneState copy = before;
  const auto s = step(t, copy, {0.0, 0.03, 0.2});
  EXPECT_EQ(copy, before);
  EXPECT_EQ(s.stage, before.stage + 1);
  EXPECT_EQ(s.placed.size(), before.placed.size() + 1);
}

TEST(Settle, RolloutFold) {
  auto t = shipped_task("tempura");
  EXPECT_EQ(rollout(t, t.initial, {}), t.initial);
  const PlacementAction a{-0.03, 0.02, 0.4};
  EXPECT_EQ(rollout(t, t.initial, std::vector<PlacementAction>{a}), step(t, t.initial, a));
}

TEST(Settle, RolloutDeterministicAndValid) {
  std::mt19937_64 rng(17);
  for (const char* name : {"taro", "shrimp", "tempura"}) {
    const auto& t = shipped_task(name);
    for (int k = 0; k < 100; ++k) {
      const auto u = random_actions(t, rng);
      const auto a = rollout(t, t.initial, u);
      const auto b = rollout(t, t.initial, u);
      ASSERT_EQ(a, b);
      const auto inv = check_invariants(a);
      EXPECT_TRUE(inv.ok(t.settle.penetration_tolerance)) << name << " sample " << k
                                                          << " penetration " << inv.max_penetration;
    }
  }
}

TEST(Settle, BatchEqualsMap) {
  const auto& t = shipped_task("tempura");
  std::mt19937_64 rng(3);
  std::vector<std::vector<PlacementAction>> batch;
  for (int k = 0; k < 24; ++k) batch.push_back(random_actions(t, rng));
  for (unsigned workers : {1u, 3u}) {
    const auto out = batch_rollout(t, t.initial, batch, workers);
    ASSERT_EQ(out.size(), batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) EXPECT_EQ(out[k], rollout(t, t.initial, batch[k]));
  }
  EXPECT_TRUE(batch_rollout(t, t.initial, {}).empty());
  EXPECT_EQ(batch_rollout(t, t.initial, {batch[0]}).front(), rollout(t, t.initial, batch[0]));
}

TEST(Settle, SceneDumpHasOneLinePerItem) {
  const auto& t = shipped_task("taro");
  const auto s = rollout(t, t.initial, std::vector<PlacementAction>{{-0.05, 0.0, 0.2}});
  std::ostringstream os;
  write_scene_dump(os, s);
  const std::string text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), static_cast<long>(s.placed.size()) + 1);
  EXPECT_NE(text.find("item 3 snap_pea"), std::string::npos);
}
