#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "pcpbo/scene.hpp"

namespace pcpbo {

/// Thrown when every sample of a planning run is invalid.
class PlanningError : public Error {
public:
  PlanningError(const std::string& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const { return diagnostics_; }

private:
  std::string diagnostics_;
};

constexpr double kPositionWeight = 1.0;
constexpr double kAngleWeight = 0.1;

/// Weighted distance between two states of the same task: positions per meter,
/// angle residuals wrapped and scaled by kAngleWeight.
double state_distance(const SceneState& a, const SceneState& b, double position_weight = kPositionWeight,
                      double angle_weight = kAngleWeight);

/// Distance of s to the rule target of w.
double arrangement_cost(const SceneState& s, const WeightVector& w, const TaskDefinition& task);

struct CemOutcome {
  Eigen::VectorXd best;
  double best_cost = 0.0;
  std::vector<double> cost_trace;  ///< elite-mean cost per iteration
  std::size_t evaluations = 0;
  std::size_t invalid = 0;
};

/// Evaluates a batch of candidate vectors; +inf marks an invalid candidate.
using BatchCost = std::function<std::vector<double>(const std::vector<Eigen::VectorXd>&)>;

/// Cross-entropy minimization over a box. Samples are drawn from a diagonal
/// Gaussian and clipped to [lo, hi]; the first sample of the first iteration
/// is the initial mean itself. Elites are chosen from the previous elites plus
/// the new samples, so the elite-mean trace never increases.
CemOutcome cem_minimize(const BatchCost& cost, const Eigen::VectorXd& mean, const Eigen::VectorXd& std0,
                        const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const CemConfig& cfg,
                        std::uint64_t seed);

struct PlanResult {
  std::vector<PlacementAction> best_actions;
  SceneState best_state;
  double best_cost = 0.0;
  std::vector<double> cost_trace;
  std::uint64_t seed = 0;
};

/// Lower-level solve: action sequence whose settled result is closest to d(w).
PlanResult plan(const TaskDefinition& task, const SceneState& alpha, const WeightVector& w,
                const CemConfig& cfg, std::uint64_t seed);

/// Seed of restart r for a task's CEM configuration.
std::uint64_t restart_seed(const CemConfig& cfg, int r);

/// Text record: header, cost, one action per line, trace, then the scene dump.
void write_plan_record(std::ostream& os, const std::string& task_id, std::size_t grid_index,
                       const PlanResult& r);
/// Parses a record written by write_plan_record; the state is re-simulated.
PlanResult read_plan_record(std::istream& is, const TaskDefinition& task);

/// Memoized plans per (task, grid index, seed), optionally backed by a directory
/// laid out as <dir>/<task_id>/g<index>_s<seed>.txt. Safe for concurrent use;
/// a plan computed twice concurrently is published once.
class PlanCache {
public:
  explicit PlanCache(std::string dir = {});

  std::shared_ptr<const PlanResult> get(const TaskDefinition& task, std::size_t grid_index,
                                        std::uint64_t seed);
  /// All cfg.restarts runs for a grid point, in restart order.
  std::vector<std::shared_ptr<const PlanResult>> restarts(const TaskDefinition& task,
                                                          std::size_t grid_index);
  /// Lowest-cost restart (ties to the earliest restart).
  std::shared_ptr<const PlanResult> best(const TaskDefinition& task, std::size_t grid_index);

  std::size_t computed() const { return computed_.load(); }
  std::size_t loaded() const { return loaded_.load(); }
  const std::string& dir() const { return dir_; }

private:
  using Key = std::tuple<std::string, std::size_t, std::uint64_t>;
  std::string path_for(const Key& k) const;

  std::string dir_;
  std::mutex mu_;
  std::map<Key, std::shared_ptr<const PlanResult>> memo_;
  std::atomic<std::size_t> computed_{0};
  std::atomic<std::size_t> loaded_{0};
};

}  // namespace pcpbo
