#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcpbo/acquisition.hpp"
#include "pcpbo/cem.hpp"
#include "pcpbo/pref_gp.hpp"
#include "pcpbo/sim_users.hpp"

namespace pcpbo {

enum class Method { pcpbo, naive };
enum class SynthesisMode { synth, skip, noskip };
/// Where pcpbo candidates come from: the best cached restart, or a uniformly
/// random cached restart (what live sessions show).
enum class CandidateSource { best_restart, random_restart };

std::string to_string(Method m);
std::string to_string(SynthesisMode m);
Method method_from_string(const std::string& s);
SynthesisMode mode_from_string(const std::string& s);

struct SessionConfig {
  Method method = Method::pcpbo;
  SynthesisMode mode = SynthesisMode::synth;
  CandidateSource source = CandidateSource::best_restart;
  int n_queries = 50;
  int n_init = 1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SessionConfig&) const = default;
};

struct QueryRecord {
  int index = 0;
  std::size_t i0 = 0;
  std::size_t i1 = 0;
  bool random = false;  ///< warm-up query from random_pair
  int redraws = 0;
  Choice choice = Choice::left;
  int synthesized = 0;  ///< records synthesized while handling this answer
  double latency_ms = 0.0;

  /// Latency is wall-clock noise and takes no part in comparisons.
  bool operator==(const QueryRecord& o) const {
    return index == o.index && i0 == o.i0 && i1 == o.i1 && random == o.random &&
           redraws == o.redraws && choice == o.choice && synthesized == o.synthesized;
  }
};

struct SessionResult {
  std::vector<std::size_t> trajectory;  ///< estimate after each round (grid index)
  std::size_t final_estimate = 0;
  WeightVector final_w;
  int skip_count = 0;
  ComparisonDataset dataset;
  std::vector<QueryRecord> log;

  bool operator==(const SessionResult&) const = default;
};

struct PendingQuery {
  int index = 0;
  QueryPair pair;
  bool random = false;
  SceneState first;
  SceneState second;
};

/// Counts how candidate states were produced.
struct SourceCounters {
  std::size_t planner_lookups = 0;
  std::size_t naive_rollouts = 0;
};

/// Skipped pair (a, b) plus the last chosen point c: records a < c and b < c.
/// A side equal to c is dropped instead of becoming a self-comparison.
std::vector<Comparison> synthesize(std::size_t a, std::size_t b, std::size_t last_selected,
                                   std::int64_t timestamp);

/// Grid point with the largest posterior mean (ties to the lowest index).
std::size_t estimate(const GaussianApprox& q);

/// One elicitation loop. Each answer advances exactly one round.
class Session {
public:
  Session(const TaskDefinition& task, SessionConfig cfg, std::shared_ptr<PlanCache> cache);

  const TaskDefinition& task() const { return task_; }
  const SessionConfig& config() const { return cfg_; }
  bool finished() const { return round_ >= cfg_.n_queries; }
  int round() const { return round_; }

  /// Outstanding query, computed on first access.
  const PendingQuery& current_query();
  /// Applies an answer to the outstanding query. Throws std::invalid_argument
  /// for a skip in noskip mode and std::logic_error when finished.
  void answer(Choice c, double latency_ms = 0.0);

  const GaussianApprox& posterior() const { return q_; }
  std::size_t current_estimate() const;
  const std::vector<std::size_t>& trajectory() const { return trajectory_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& pending_skipped() const { return pending_; }
  std::optional<std::size_t> last_selected() const { return last_selected_; }
  const SourceCounters& counters() const { return counters_; }

  /// State presented for grid point i under this session's method.
  SceneState candidate_state(std::size_t i);

  SessionResult result() const;

  /// JSON header line describing the session; see replay_session.
  std::string log_header() const;
  /// JSON line for one answered round.
  static std::string log_line(const QueryRecord& r);

private:
  void prepare();
  void refit();

  const TaskDefinition& task_;
  SessionConfig cfg_;
  std::shared_ptr<PlanCache> cache_;
  WeightGrid grid_;
  Rng acq_rng_;
  Rng source_rng_;

  int round_ = 0;
  std::optional<PendingQuery> pending_query_;
  ComparisonDataset data_;
  std::vector<std::pair<std::size_t, std::size_t>> pending_;
  std::optional<std::size_t> last_selected_;
  GaussianApprox q_;
  std::vector<std::size_t> trajectory_;
  std::vector<QueryRecord> log_;
  int skips_ = 0;
  SourceCounters counters_;
};

/// Runs all rounds against an answerer. When `log` is given, the header and
/// one line per round are appended and flushed as the session progresses.
SessionResult run_session(const TaskDefinition& task, const SessionConfig& cfg, Answerer& answerer,
                          std::shared_ptr<PlanCache> cache, std::ostream* log = nullptr);

/// Rebuilds a session from a log written by run_session or the service and
/// replays every recorded answer. Partial logs resume mid-session.
std::unique_ptr<Session> replay_session(std::istream& log, const TaskDefinition& task,
                                        std::shared_ptr<PlanCache> cache);

SessionConfig session_config_from_header(const std::string& header_line);

struct SessionMetrics {
  std::vector<double> distance;  ///< ||w_k - w*|| per round
  double skip_rate = 0.0;
};

SessionMetrics metrics(const SessionResult& r, const WeightGrid& grid, const WeightVector& w_star);

}  // namespace pcpbo
