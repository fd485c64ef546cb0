#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcpbo/session.hpp"

namespace pcpbo {

/// A simulated participant: target weights plus an optional uncertainty model.
struct UserFixture {
  std::string name;
  WeightVector w_star;
  std::optional<UncertainConfig> uncertain;
};

/// {"users": [{"name", "w_star": [...], "uncertain": {"t0", "t1"} | null}]}
std::vector<UserFixture> parse_users(const std::string& json_text, const TaskDefinition& task);
std::vector<UserFixture> load_users(const std::string& path, const TaskDefinition& task);

struct ExperimentSpec {
  std::vector<Method> methods{Method::pcpbo, Method::naive};
  std::vector<SynthesisMode> modes{SynthesisMode::synth};
  std::vector<UserFixture> users;
  int trials = 10;
  int n_queries = 50;
  int n_init = 1;
  std::uint64_t seed = 0;
};

struct TrialSummary {
  Method method;
  SynthesisMode mode;
  std::string user;
  int trial = 0;
  std::uint64_t seed = 0;
  double final_distance = 0.0;
  double skip_rate = 0.0;
};

/// Seeds of one (user, trial) cell; shared by every method and mode so the
/// conditions see the same acquisition stream and the same user noise.
std::uint64_t session_seed(std::uint64_t base, std::size_t user, int trial);
std::uint64_t user_seed(std::uint64_t base, std::size_t user, int trial);

inline constexpr const char* kCsvHeader = "task,method,mode,user,trial,query_index,distance,skipped,seed";

/// Runs every method x mode x user x trial session and writes one CSV row per
/// query (header included) to `csv`.
std::vector<TrialSummary> run_experiment(const TaskDefinition& task, const ExperimentSpec& spec,
                                         std::shared_ptr<PlanCache> cache, std::ostream& csv);

struct FeasibilityReport {
  std::size_t points = 0;
  double worst_penetration = 0.0;
  double worst_margin = 0.0;  ///< max of best_cost - naive cost (<= 0 when feasible)
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// For every grid point: the best cached plan settles without penetration
/// beyond `tolerance`, every item is supported, and its cost does not exceed
/// that of executing the reference actions directly.
FeasibilityReport check_planner_feasibility(const TaskDefinition& task, PlanCache& cache,
                                            double tolerance = 1e-4);

}  // namespace pcpbo
