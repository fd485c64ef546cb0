#include "pcpbo/sim_users.hpp"

#include <algorithm>
#include <random>

#include "pcpbo/cem.hpp"
#include "pcpbo/rule_map.hpp"

namespace pcpbo {

std::string to_string(Choice c) {
  switch (c) {
    case Choice::left: return "left";
    case Choice::right: return "right";
    case Choice::skip: return "skip";
  }
  return "?";
}

Choice choice_from_string(const std::string& s) {
  if (s == "left") return Choice::left;
  if (s == "right") return Choice::right;
  if (s == "skip") return Choice::skip;
  throw std::invalid_argument("choice must be left, right or skip (got '" + s + "')");
}

void PreferenceModel::validate() const {
  if (!(c_max > 0) || beta < 0 || violation_penalty < 0)
    throw ConfigError("PreferenceModel: c_max > 0, beta >= 0, violation_penalty >= 0");
}

double preference_value(double distance, int violations, const PreferenceModel& m) {
  return std::clamp(m.c_max - m.beta * distance - m.violation_penalty * violations, 0.0, m.c_max);
}

double preference_value(const SceneState& s, const PreferenceModel& m, const TaskDefinition& task) {
  if (s.task_id != task.task_id) throw std::invalid_argument("preference_value: task mismatch");
  const double dist = state_distance(s, rule_target(m.w_star, task), 1.0, 1.0);
  return preference_value(dist, rule_violations(s, task), m);
}

int ideal_answer(double c0, double c1) { return c0 >= c1 ? 0 : 1; }

void UncertainConfig::validate() const {
  if (!(t0 < t1)) throw ConfigError("UncertainConfig: t0 must be below t1");
}

std::optional<int> uncertain_answer(double c0, double c1, const UncertainConfig& cfg, Rng& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double c_min = std::min(c0, c1);
  bool random = false;
  if (c_min < cfg.t0) {
    random = false;
  } else if (c_min <= cfg.t1) {
    random = (c_min - cfg.t0) / (cfg.t1 - cfg.t0) > unif(rng);
  } else {
    random = true;
  }
  if (!random) return c1 - c0 > 0.0 ? 1 : 0;
  if (cfg.skip_enabled) return std::nullopt;
  return unif(rng) - 0.5 > 0.0 ? 1 : 0;
}

SimulatedUser::SimulatedUser(const TaskDefinition& task, PreferenceModel model,
                             std::optional<UncertainConfig> uncertain, std::uint64_t seed)
    : task_(task), model_(std::move(model)), uncertain_(uncertain), rng_(seed) {
  model_.validate();
  if (uncertain_) uncertain_->validate();
}

Choice SimulatedUser::answer(const SceneState& first, const SceneState& second) {
  const double c0 = preference_value(first, model_, task_);
  const double c1 = preference_value(second, model_, task_);
  if (!uncertain_) return ideal_answer(c0, c1) == 0 ? Choice::left : Choice::right;
  const auto y = uncertain_answer(c0, c1, *uncertain_, rng_);
  if (!y) return Choice::skip;
  return *y == 0 ? Choice::left : Choice::right;
}

}  // namespace pcpbo
