#pragma once

#include <string>
#include <vector>

#include "pcpbo/scene.hpp"

namespace pcpbo {

/// Rule-abiding target arrangement for weight w, ignoring physics.
///
/// Movable item m gets yaw psi_m = yaw_min + w_m (yaw_max - yaw_min). Its long
/// axis points at the template anchor on the lean target; the contact edge is
/// where that axis leaves the target's top face. The item leans on that edge
/// with its low end on the plate, touching the edge at a fraction of its length
/// that grows with |psi_m - yaw_center|.
SceneState rule_target(const WeightVector& w, const TaskDefinition& task);

/// In-plane components of rule_target, one action per movable item. This is
/// what the naive baseline executes.
std::vector<PlacementAction> reference_actions(const WeightVector& w, const TaskDefinition& task);

/// Checks the shipped rule predicates for one movable item:
/// it leans (|pitch| >= lean_min, not on its side), its raised end points to the
/// back of the dish, and its centre stays below the top of its lean target.
bool follows_rules(const SceneState& s, const TaskDefinition& task, int item_id);

/// Number of movable items present in s that break a rule predicate.
int rule_violations(const SceneState& s, const TaskDefinition& task);

struct TemplateReport {
  std::size_t grid_points = 0;
  double min_gap = 0.0;            ///< smallest pairwise distance between flattened targets
  double lipschitz = 0.0;          ///< max ||d(w) - d(w')|| / ||w - w'|| over grid neighbours
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// Injectivity, continuity and rule-predicate sweep over the whole weight grid.
TemplateReport validate_template(const TaskDefinition& task, double lipschitz_bound = 10.0);

}  // namespace pcpbo
