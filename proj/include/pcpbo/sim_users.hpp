#pragma once

#include <optional>
#include <string>

#include "pcpbo/pref_gp.hpp"
#include "pcpbo/scene.hpp"

namespace pcpbo {

/// Answer to a query: left = first candidate preferred (y = 0), right = second (y = 1).
enum class Choice { left, right, skip };
std::string to_string(Choice c);
Choice choice_from_string(const std::string& s);

struct PreferenceModel {
  WeightVector w_star;
  double c_max = 100.0;
  double beta = 150.0;              ///< per unit of flattened-state distance
  double violation_penalty = 40.0;  ///< per rule-breaking item

  void validate() const;
};

/// max(0, c_max - beta * distance - penalty * violations), capped at c_max.
double preference_value(double distance, int violations, const PreferenceModel& m);

/// Degree of preference of a settled state: distance is the plain Euclidean
/// norm of the flattened residual to d(w*) with wrapped angles.
double preference_value(const SceneState& s, const PreferenceModel& m, const TaskDefinition& task);

/// 0 iff c0 >= c1.
int ideal_answer(double c0, double c1);

struct UncertainConfig {
  double t0 = 20.0;
  double t1 = 50.0;
  bool skip_enabled = true;

  void validate() const;
};

/// Branching answer model of uncertain users; std::nullopt is a skip.
/// c_min < t0: decisive. t0 <= c_min <= t1: random (or skip) with probability
/// (c_min - t0) / (t1 - t0). c_min > t1: always random (or skip).
std::optional<int> uncertain_answer(double c0, double c1, const UncertainConfig& cfg, Rng& rng);

/// Something that answers queries: a simulated user or a live channel.
class Answerer {
public:
  virtual ~Answerer() = default;
  virtual Choice answer(const SceneState& first, const SceneState& second) = 0;
};

class SimulatedUser final : public Answerer {
public:
  /// Ideal user when `uncertain` is empty.
  SimulatedUser(const TaskDefinition& task, PreferenceModel model,
                std::optional<UncertainConfig> uncertain, std::uint64_t seed);
  Choice answer(const SceneState& first, const SceneState& second) override;

  const PreferenceModel& model() const { return model_; }

private:
  const TaskDefinition& task_;
  PreferenceModel model_;
  std::optional<UncertainConfig> uncertain_;
  Rng rng_;
};

}  // namespace pcpbo
