#include <gtest/gtest.h>

#include "pcpbo/render.hpp"
#include "pcpbo/rule_map.hpp"
#include "pcpbo/settle.hpp"
#include "support/fixtures.hpp"
#include "support/mini_task.hpp"

using namespace pcpbo;

TEST(Render, EmptyPlate) {
  SceneState empty;
  const auto r = render(empty, 0.12, View::top);
  ASSERT_EQ(r.primitives.size(), 1u);
  EXPECT_EQ(r.primitives[0].tag, "plate");
  EXPECT_NEAR(geom::area(r.primitives[0].vertices), 0.5 * 32 * 0.12 * 0.12 * std::sin(2 * kPi / 32), 1e-12);
}

TEST(Render, OnePrimitivePerItemAndDeterministic) {
  const auto& t = shipped_task("tempura");
  const auto s = rollout(t, t.initial, reference_actions(WeightVector({0.4, 0.6, 0.2}), t));
  for (View v : {View::top, View::oblique}) {
    const auto a = render(s, t, v);
    EXPECT_EQ(a, render(s, t, v));
    EXPECT_EQ(a.primitives.size(), s.placed.size() + 1);
    EXPECT_EQ(to_json(a).dump(), to_json(render(s, t, v)).dump());
  }
}

TEST(Render, PainterOrder) {
  const auto& t = shipped_task("tempura");
  const auto s = rollout(t, t.initial, reference_actions(WeightVector({0.4, 0.6, 0.2}), t));
  const auto r = render(s, t, View::oblique);
  double last_base = -1.0;
  int last_id = -1;
  for (std::size_t k = 1; k < r.primitives.size(); ++k) {
    const auto& p = r.primitives[k];
    EXPECT_EQ(p.z_order, static_cast<int>(k));
    const auto* it = s.find(p.item_id);
    ASSERT_NE(it, nullptr);
    double base = 1e9;
    for (const auto& c : geom::corners(geom::box_of(it->spec, it->pose))) base = std::min(base, c.z());
    EXPECT_TRUE(base > last_base || (base == last_base && p.item_id > last_id));
    last_base = base;
    last_id = p.item_id;
  }
}

TEST(Render, ToppledItemShowsLongFace) {
  auto t = mini_task(0.02, 0.03, 0.03, 0.02, 0.005, 0.03);
  SceneState upright = t.initial;
  upright.placed.push_back({t.item(1), Pose{-0.06, 0.0, 0.015, 0, 0, 0}});
  const auto toppled = step(t, t.initial, {0.03, 0.0, 0.0});
  const auto area_of = [&](const SceneState& s) {
    for (const auto& p : render(s, t, View::top).primitives)
      if (p.item_id == 1) return geom::area(p.vertices);
    return 0.0;
  };
  EXPECT_GT(area_of(toppled), area_of(upright));
}

TEST(Render, ViewNames) {
  EXPECT_EQ(view_from_string("oblique"), View::oblique);
  EXPECT_THROW(view_from_string("side"), std::invalid_argument);
}
