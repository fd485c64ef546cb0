#include "pcpbo/session.hpp"

#include <chrono>
#include <istream>
#include <ostream>
#include <random>

#include "json.hpp"

#include "pcpbo/random.hpp"
#include "pcpbo/rule_map.hpp"
#include "pcpbo/settle.hpp"

namespace pcpbo {

using nlohmann::json;

std::string to_string(Method m) { return m == Method::pcpbo ? "pcpbo" : "naive"; }

std::string to_string(SynthesisMode m) {
  switch (m) {
    case SynthesisMode::synth: return "synth";
    case SynthesisMode::skip: return "skip";
    case SynthesisMode::noskip: return "noskip";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "pcpbo") return Method::pcpbo;
  if (s == "naive" || s == "naive-baseline") return Method::naive;
  throw std::invalid_argument("method must be pcpbo or naive (got '" + s + "')");
}

SynthesisMode mode_from_string(const std::string& s) {
  if (s == "synth") return SynthesisMode::synth;
  if (s == "skip") return SynthesisMode::skip;
  if (s == "noskip") return SynthesisMode::noskip;
  throw std::invalid_argument("mode must be synth, skip or noskip (got '" + s + "')");
}

void SessionConfig::validate() const {
  if (n_queries < 1) throw ConfigError("session: N must be at least 1");
  if (n_init < 0 || n_init > n_queries) throw ConfigError("session: need 0 <= n_init <= N");
}

std::vector<Comparison> synthesize(std::size_t a, std::size_t b, std::size_t last_selected,
                                   std::int64_t timestamp) {
  std::vector<Comparison> out;
  for (std::size_t side : {a, b}) {
    if (side == last_selected) continue;
    out.push_back({side, last_selected, 1, Provenance::synthesized, timestamp});
  }
  return out;
}

std::size_t estimate(const GaussianApprox& q) { return argmax_lowest(q.mean()); }

Session::Session(const TaskDefinition& task, SessionConfig cfg, std::shared_ptr<PlanCache> cache)
    : task_(task), cfg_(cfg), cache_(std::move(cache)), grid_(task.grid()),
      acq_rng_(derive_seed(cfg.seed, {1})), source_rng_(derive_seed(cfg.seed, {2})),
      q_(fit_posterior(ComparisonDataset{}, task.gp, grid_)) {
  cfg_.validate();
  if (!cache_) cache_ = std::make_shared<PlanCache>();
}

SceneState Session::candidate_state(std::size_t i) {
  if (cfg_.method == Method::naive) {
    ++counters_.naive_rollouts;
    return rollout(task_, task_.initial, reference_actions(grid_.point(i), task_));
  }
  ++counters_.planner_lookups;
  if (cfg_.source == CandidateSource::best_restart) return cache_->best(task_, i)->best_state;
  auto all = cache_->restarts(task_, i);
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  return all[pick(source_rng_)]->best_state;
}

void Session::prepare() {
  for (int attempt = 0;; ++attempt) {
    PendingQuery pq;
    pq.index = round_;
    pq.random = round_ < cfg_.n_init;
    pq.pair = pq.random ? random_pair(grid_, acq_rng_)
                        : thompson_pair(q_, grid_, task_.acquisition, acq_rng_);
    try {
      pq.first = candidate_state(pq.pair.i0);
      pq.second = candidate_state(pq.pair.i1);
    } catch (const PlanningError&) {
      if (attempt >= 1) throw;
      continue;  // resample the query once
    }
    pending_query_ = std::move(pq);
    return;
  }
}

const PendingQuery& Session::current_query() {
  if (finished()) throw std::logic_error("session finished");
  if (!pending_query_) prepare();
  return *pending_query_;
}

void Session::refit() { q_ = fit_posterior(data_, task_.gp, grid_); }

void Session::answer(Choice c, double latency_ms) {
  if (finished()) throw std::logic_error("session finished");
  if (c == Choice::skip && cfg_.mode == SynthesisMode::noskip)
    throw std::invalid_argument("skip is not available in noskip mode");
  const PendingQuery& pq = current_query();

  QueryRecord rec;
  rec.index = round_;
  rec.i0 = pq.pair.i0;
  rec.i1 = pq.pair.i1;
  rec.random = pq.random;
  rec.redraws = pq.pair.redraws;
  rec.choice = c;
  rec.latency_ms = latency_ms;

  const std::size_t before = data_.size();
  if (c == Choice::skip) {
    ++skips_;
    if (cfg_.mode == SynthesisMode::synth) {
      if (last_selected_) {
        for (const auto& r : synthesize(rec.i0, rec.i1, *last_selected_, round_)) data_.add(r);
      } else {
        pending_.emplace_back(rec.i0, rec.i1);
      }
    }
  } else {
    const int y = c == Choice::right ? 1 : 0;
    const Comparison direct{rec.i0, rec.i1, y, Provenance::direct, round_};
    data_.add(direct);
    last_selected_ = direct.winner();
    for (const auto& [a, b] : pending_)
      for (const auto& r : synthesize(a, b, *last_selected_, round_)) data_.add(r);
    pending_.clear();
  }
  rec.synthesized = static_cast<int>(data_.size() - before) - (c == Choice::skip ? 0 : 1);

  if (data_.size() != before) refit();
  trajectory_.push_back(estimate(q_));
  log_.push_back(rec);
  pending_query_.reset();
  ++round_;
}

std::size_t Session::current_estimate() const { return estimate(q_); }

SessionResult Session::result() const {
  SessionResult r;
  r.trajectory = trajectory_;
  r.final_estimate = estimate(q_);
  r.final_w = grid_.point(r.final_estimate);
  r.skip_count = skips_;
  r.dataset = data_;
  r.log = log_;
  return r;
}

std::string Session::log_header() const {
  const json j{{"type", "session"},
               {"task", task_.task_id},
               {"method", to_string(cfg_.method)},
               {"mode", to_string(cfg_.mode)},
               {"source", cfg_.source == CandidateSource::best_restart ? "best" : "random"},
               {"n_queries", cfg_.n_queries},
               {"n_init", cfg_.n_init},
               {"seed", cfg_.seed}};
  return j.dump();
}

std::string Session::log_line(const QueryRecord& r) {
  const json j{{"round", r.index},
               {"i0", r.i0},
               {"i1", r.i1},
               {"choice", to_string(r.choice)},
               {"latency_ms", r.latency_ms}};
  return j.dump();
}

SessionConfig session_config_from_header(const std::string& header_line) {
  try {
    const json j = json::parse(header_line);
    if (j.value("type", "") != "session") throw ConfigError("not a session log header");
    SessionConfig c;
    c.method = method_from_string(j.at("method").get<std::string>());
    c.mode = mode_from_string(j.at("mode").get<std::string>());
    c.source = j.value("source", "best") == "random" ? CandidateSource::random_restart
                                                      : CandidateSource::best_restart;
    c.n_queries = j.at("n_queries").get<int>();
    c.n_init = j.at("n_init").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad session header: ") + e.what());
  }
}

SessionResult run_session(const TaskDefinition& task, const SessionConfig& cfg, Answerer& answerer,
                          std::shared_ptr<PlanCache> cache, std::ostream* log) {
  Session s(task, cfg, std::move(cache));
  if (log) *log << s.log_header() << '\n' << std::flush;
  while (!s.finished()) {
    const PendingQuery& q = s.current_query();
    const auto t0 = std::chrono::steady_clock::now();
    const Choice c = answerer.answer(q.first, q.second);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    s.answer(c, ms);
    if (log) *log << Session::log_line(s.result().log.back()) << '\n' << std::flush;
  }
  return s.result();
}

std::unique_ptr<Session> replay_session(std::istream& log, const TaskDefinition& task,
                                        std::shared_ptr<PlanCache> cache) {
  std::string line;
  if (!std::getline(log, line)) throw ConfigError("empty session log");
  const json head = json::parse(line, nullptr, false);
  if (head.is_discarded() || head.value("task", "") != task.task_id)
    throw ConfigError("session log belongs to another task");
  auto s = std::make_unique<Session>(task, session_config_from_header(line), std::move(cache));
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed session log line");
    const PendingQuery& q = s->current_query();
    if (j.at("round").get<int>() != q.index || j.at("i0").get<std::size_t>() != q.pair.i0 ||
        j.at("i1").get<std::size_t>() != q.pair.i1)
      throw ConfigError("session log diverges from the replayed session");
    s->answer(choice_from_string(j.at("choice").get<std::string>()), j.value("latency_ms", 0.0));
  }
  return s;
}

SessionMetrics metrics(const SessionResult& r, const WeightGrid& grid, const WeightVector& w_star) {
  SessionMetrics m;
  for (std::size_t k : r.trajectory) m.distance.push_back(w_distance(grid.point(k), w_star));
  m.skip_rate = r.log.empty() ? 0.0 : static_cast<double>(r.skip_count) / static_cast<double>(r.log.size());
  return m;
}

}  // namespace pcpbo
