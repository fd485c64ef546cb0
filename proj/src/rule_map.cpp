#include "pcpbo/rule_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "pcpbo/geometry.hpp"
#include "pcpbo/settle.hpp"

namespace pcpbo {

namespace {

using geom::Polygon;
using geom::Vec2;

const RuleItem& rule_item(const TaskDefinition& task, int item_id) {
  for (const auto& r : task.rule.items)
    if (r.item == item_id) return r;
  throw std::out_of_range(fmt::format("no rule for item {}", item_id));
}

Polygon top_face(const PlacedItem& it) {
  const bool side = std::abs(it.pose.roll) > kPi / 4.0;
  return geom::rectangle(Vec2(it.pose.x, it.pose.y), it.pose.yaw, it.spec.hx,
                         side ? 0.5 * it.spec.height : it.spec.hy);
}

// Distance from p along -u to the boundary of the convex polygon containing p.
double exit_distance(const Polygon& poly, const Vec2& p, const Vec2& u) {
  double t = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = poly[(i + 1) % n] - poly[i];
    const Vec2 inward(-e.y(), e.x());
    const double rate = inward.dot(-u);
    if (rate >= 0.0) continue;
    t = std::min(t, inward.dot(p - poly[i]) / -rate);
  }
  return std::max(t, 0.0);
}

void check_dims(const WeightVector& w, const TaskDefinition& task) {
  if (static_cast<int>(w.size()) != task.weight_dims())
    throw std::invalid_argument(fmt::format("weight has {} components, task '{}' expects {}",
                                            w.size(), task.task_id, task.weight_dims()));
}

}  // namespace

SceneState rule_target(const WeightVector& w, const TaskDefinition& task) {
  check_dims(w, task);
  SceneState s = task.initial;
  for (std::size_t m = 0; m < task.rule.items.size(); ++m) {
    const RuleItem& r = task.rule.items[m];
    const ItemSpec& spec = task.item(r.item);
    const PlacedItem* target = task.initial.find(r.lean_target);
    if (target == nullptr) throw ConfigError("lean target is not part of the initial scene");

    const double psi = r.yaw_min + w[m] * (r.yaw_max - r.yaw_min);
    const Vec2 u(std::cos(psi), std::sin(psi));
    const Vec2 anchor(r.anchor_x, r.anchor_y);
    const Vec2 pivot = anchor - u * exit_distance(top_face(*target), anchor, u);
    const double z_high = top_height(*target);

    const double half_range = 0.5 * (r.yaw_max - r.yaw_min);
    const double kappa =
        r.contact_base + r.contact_gain * std::min(1.0, std::abs(psi - r.yaw_center) / half_range);
    const double d = 2.0 * kappa * spec.hx;  // low end to contact edge
    const double a = d - spec.hx;            // centre to contact edge
    const double phi = std::asin(std::min(1.0, z_high / d));
    const double ez = 0.5 * spec.height;

    const Vec2 c = pivot - u * (a * std::cos(phi) + ez * std::sin(phi));
    const Pose pose{c.x(), c.y(), z_high - a * std::sin(phi) + ez * std::cos(phi), 0.0, -phi, psi};
    s.placed.push_back({spec, normalized(pose)});
  }
  std::sort(s.placed.begin(), s.placed.end(),
            [](const PlacedItem& x, const PlacedItem& y) { return x.spec.id < y.spec.id; });
  s.stage = task.movable_count();
  return s;
}

std::vector<PlacementAction> reference_actions(const WeightVector& w, const TaskDefinition& task) {
  const SceneState target = rule_target(w, task);
  std::vector<PlacementAction> out;
  out.reserve(task.movable_order.size());
  for (int id : task.movable_order) {
    const Pose& p = target.find(id)->pose;
    out.push_back({p.x, p.y, p.yaw});
  }
  return out;
}

bool follows_rules(const SceneState& s, const TaskDefinition& task, int item_id) {
  const RuleItem& r = rule_item(task, item_id);
  const PlacedItem* it = s.find(item_id);
  if (it == nullptr) throw std::out_of_range(fmt::format("item {} not placed", item_id));
  const Pose& p = it->pose;
  if (std::abs(p.roll) > kPi / 4.0) return false;  // toppled onto its side
  if (std::abs(p.pitch) < r.lean_min) return false;

  // long-axis end points; the raised one must face the back
  const geom::Box b = geom::box_of(it->spec, p);
  const geom::Vec3 e0 = b.center + b.rot.col(0) * b.half.x();
  const geom::Vec3 e1 = b.center - b.rot.col(0) * b.half.x();
  const geom::Vec3& hi = e0.z() >= e1.z() ? e0 : e1;
  const geom::Vec3& lo = e0.z() >= e1.z() ? e1 : e0;
  if ((hi.x() - lo.x()) * task.rule.back_x + (hi.y() - lo.y()) * task.rule.back_y <= 0.0)
    return false;

  const PlacedItem* target = s.find(r.lean_target);
  if (target == nullptr) return false;
  return p.z < top_height(*target);
}

int rule_violations(const SceneState& s, const TaskDefinition& task) {
  if (s.task_id != task.task_id)
    throw std::invalid_argument("rule_violations: state belongs to another task");
  int n = 0;
  for (const auto& r : task.rule.items)
    if (s.find(r.item) != nullptr && !follows_rules(s, task, r.item)) ++n;
  return n;
}

TemplateReport validate_template(const TaskDefinition& task, double lipschitz_bound) {
  TemplateReport rep;
  const WeightGrid grid = task.grid();
  rep.grid_points = grid.size();

  std::vector<Eigen::VectorXd> targets;
  targets.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const SceneState t = rule_target(grid.point(k), task);
    for (const auto& r : task.rule.items)
      if (!follows_rules(t, task, r.item))
        rep.failures.push_back(fmt::format("grid point {}: item {} breaks a rule", k, r.item));
    targets.push_back(flatten_state(t));
  }

  // exhaustive; ~43M pairs on the largest grid, still only seconds
  rep.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < targets.size(); ++i)
    for (std::size_t j = i + 1; j < targets.size(); ++j)
      rep.min_gap = std::min(rep.min_gap, (targets[i] - targets[j]).norm());
  if (targets.size() < 2) rep.min_gap = 0.0;
  if (targets.size() >= 2 && rep.min_gap <= 1e-9)
    rep.failures.push_back(fmt::format("rule map not injective (min gap {:.3g})", rep.min_gap));

  const double step = 1.0 / (grid.points_per_dim() - 1);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto mi = grid.multi_index(k);
    for (int d = 0; d < grid.dims(); ++d) {
      if (mi[static_cast<std::size_t>(d)] + 1 >= grid.points_per_dim()) continue;
      auto nb = mi;
      ++nb[static_cast<std::size_t>(d)];
      const double l = (targets[k] - targets[grid.flat_index(nb)]).norm() / step;
      rep.lipschitz = std::max(rep.lipschitz, l);
    }
  }
  if (rep.lipschitz > lipschitz_bound)
    rep.failures.push_back(
        fmt::format("rule map too steep: {:.3g} > {:.3g}", rep.lipschitz, lipschitz_bound));
  return rep;
}

}  // namespace pcpbo
