#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "pcpbo/scene.hpp"

namespace pcpbo {

/// Height from which an item is dropped: the highest top surface under its
/// footprint at (x, y, yaw), plus half its height, plus the clearance gap.
/// Throws PlacementError when the footprint misses the plate entirely.
double drop_height(const SceneState& s, const ItemSpec& item, double x, double y, double yaw,
                   const SettleConfig& cfg, double plate_radius);

/// Settles the next movable item (movable_order[s.stage]) dropped with action a.
///
/// The item ends up in one of three configurations:
///  - flat on the highest support under it, when its centre of mass projects
///    inside the support polygon;
///  - leaning along its long axis, with the low end on the next lower level and
///    the bottom face resting on the support edge, when the overlap beyond the
///    edge is at least friction_hold of its length and the lean is at most
///    tip_angle;
///  - toppled: rotated onto its largest face and slid off the failed support,
///    then settled again at the new spot.
/// Any candidate that would interpenetrate is slid away from the obstacle.
/// Earlier movable items are then re-checked once in placement order.
SceneState step(const TaskDefinition& task, const SceneState& s, const PlacementAction& a);

/// Applies step recursively from alpha. |U| may be anything up to the number
/// of remaining movable items.
SceneState rollout(const TaskDefinition& task, const SceneState& alpha,
                   std::span<const PlacementAction> actions);

/// Element-wise rollout; `workers` > 1 evaluates on that many threads.
std::vector<SceneState> batch_rollout(const TaskDefinition& task, const SceneState& alpha,
                                      const std::vector<std::vector<PlacementAction>>& batch,
                                      unsigned workers = 1);

/// True when the item rests flat (zero pitch, roll a multiple of pi/2).
bool rests_flat(const Pose& p);
/// Height of the highest point of an item.
double top_height(const PlacedItem& it);

/// Largest pairwise box penetration in the scene.
double max_penetration(const SceneState& s);

/// Geometric support test: the item lies flat on the plate, or its centre of
/// mass projects inside the hull of its contacts with the plate and other items.
bool supported(const SceneState& s, int item_id, double tol = 5e-5);

struct InvariantReport {
  double max_penetration = 0.0;
  std::vector<int> unsupported;

  bool ok(double penetration_tolerance) const {
    return max_penetration <= penetration_tolerance && unsupported.empty();
  }
};

InvariantReport check_invariants(const SceneState& s);

/// Line-oriented dump: one "item <id> <name> x y z roll pitch yaw" line per item.
void write_scene_dump(std::ostream& os, const SceneState& s);

}  // namespace pcpbo
