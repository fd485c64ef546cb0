#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "pcpbo/session.hpp"
#include "support/fixtures.hpp"
#include "support/scripted.hpp"

using namespace pcpbo;

namespace {

SessionConfig config(Method m, SynthesisMode mode, int n, std::uint64_t seed, int n_init = 1) {
  SessionConfig c;
  c.method = m;
  c.mode = mode;
  c.n_queries = n;
  c.n_init = n_init;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Session, MinimalSession) {
  const auto& t = shipped_task("taro");
  PreferenceModel m;
  m.w_star = WeightVector({0.5});
  SimulatedUser user(t, m, std::nullopt, 1);
  const auto r = run_session(t, config(Method::pcpbo, SynthesisMode::synth, 1, 3), user, shared_cache());
  EXPECT_EQ(r.dataset.size(), 1u);
  EXPECT_EQ(r.trajectory.size(), 1u);
  EXPECT_EQ(r.log.size(), 1u);
  EXPECT_TRUE(r.log[0].random);
}

TEST(Session, ConfigValidation) {
  EXPECT_THROW(config(Method::pcpbo, SynthesisMode::synth, 0, 1).validate(), ConfigError);
  EXPECT_THROW(config(Method::pcpbo, SynthesisMode::synth, 3, 1, 4).validate(), ConfigError);
  EXPECT_THROW(method_from_string("pbbo"), std::invalid_argument);
  EXPECT_EQ(method_from_string("naive-baseline"), Method::naive);
  EXPECT_THROW(mode_from_string("maybe"), std::invalid_argument);
}

TEST(Session, Synthesize) {
  const auto recs = synthesize(4, 9, 2, 7);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0], (Comparison{4, 2, 1, Provenance::synthesized, 7}));
  EXPECT_EQ(recs[1], (Comparison{9, 2, 1, Provenance::synthesized, 7}));
  const auto one = synthesize(4, 2, 2, 0);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].loser(), 4u);
  EXPECT_EQ(one[0].winner(), 2u);
}

TEST(Session, SkipsQueueUntilFirstChoice) {
  const auto& t = shipped_task("taro");
  Session s(t, config(Method::naive, SynthesisMode::synth, 5, 11), nullptr);
  s.current_query();
  s.answer(Choice::skip);
  s.current_query();
  s.answer(Choice::skip);
  EXPECT_EQ(s.pending_skipped().size(), 2u);
  EXPECT_FALSE(s.last_selected());
  EXPECT_EQ(s.result().dataset.size(), 0u);
  const auto q = s.current_query().pair;
  s.answer(Choice::right);
  EXPECT_TRUE(s.pending_skipped().empty());
  ASSERT_TRUE(s.last_selected());
  EXPECT_EQ(*s.last_selected(), q.i1);
  const auto data = s.result().dataset;
  EXPECT_GE(data.size(), 3u);
  EXPECT_EQ(data[0].provenance, Provenance::direct);
  for (std::size_t k = 1; k < data.size(); ++k) {
    EXPECT_EQ(data[k].provenance, Provenance::synthesized);
    EXPECT_EQ(data[k].winner(), q.i1);
  }
  EXPECT_EQ(s.trajectory().size(), 3u);
}

TEST(Session, LastSelectedFollowsWinners) {
  const auto& t = shipped_task("taro");
  Session s(t, config(Method::naive, SynthesisMode::synth, 8, 5), nullptr);
  const std::vector<Choice> script{Choice::left, Choice::skip, Choice::right, Choice::skip, Choice::left};
  std::optional<std::size_t> last;
  for (Choice c : script) {
    const auto q = s.current_query().pair;
    s.answer(c);
    if (c == Choice::left) last = q.i0;
    if (c == Choice::right) last = q.i1;
    EXPECT_EQ(s.last_selected(), last);
  }
  std::set<std::size_t> chosen;
  for (const auto& r : s.result().log)
    if (r.choice != Choice::skip) chosen.insert(r.choice == Choice::left ? r.i0 : r.i1);
  for (const auto& c : s.result().dataset.records())
    if (c.provenance == Provenance::synthesized) EXPECT_TRUE(chosen.count(c.winner()));
}

TEST(Session, SkipModeOnlyCounts) {
  const auto& t = shipped_task("taro");
  ScriptedAnswerer a({Choice::left, Choice::skip, Choice::skip});
  const auto r = run_session(t, config(Method::naive, SynthesisMode::skip, 9, 2), a, nullptr);
  EXPECT_EQ(r.skip_count, 6);
  EXPECT_EQ(r.dataset.size(), 3u);
  for (const auto& c : r.dataset.records()) EXPECT_EQ(c.provenance, Provenance::direct);
}

TEST(Session, NoskipRejectsSkipAndKeepsNRecords) {
  const auto& t = shipped_task("shrimp");
  Session s(t, config(Method::naive, SynthesisMode::noskip, 3, 2), nullptr);
  s.current_query();
  EXPECT_THROW(s.answer(Choice::skip), std::invalid_argument);
  EXPECT_EQ(s.round(), 0);

  PreferenceModel m;
  m.w_star = WeightVector({0.3, 0.3});
  UncertainConfig u{20.0, 100.0, false};
  SimulatedUser user(t, m, u, 4);
  const auto r = run_session(t, config(Method::naive, SynthesisMode::noskip, 20, 9), user, nullptr);
  EXPECT_EQ(r.skip_count, 0);
  EXPECT_EQ(r.dataset.size(), 20u);
}

TEST(Session, MethodsShareAcquisitionPath) {
  // with answers independent of the states, both methods see the same queries
  const auto& t = shipped_task("taro");
  ScriptedAnswerer a1({Choice::left, Choice::right, Choice::right}), a2({Choice::left, Choice::right, Choice::right});
  Session p(t, config(Method::pcpbo, SynthesisMode::synth, 12, 21), shared_cache());
  Session n(t, config(Method::naive, SynthesisMode::synth, 12, 21), shared_cache());
  while (!p.finished()) {
    const auto& qp = p.current_query();
    const auto& qn = n.current_query();
    EXPECT_EQ(qp.pair, qn.pair);
    p.answer(a1.answer(qp.first, qp.second));
    n.answer(a2.answer(qn.first, qn.second));
  }
  EXPECT_EQ(p.trajectory(), n.trajectory());
  EXPECT_EQ(p.counters().planner_lookups, 24u);
  EXPECT_EQ(p.counters().naive_rollouts, 0u);
  EXPECT_EQ(n.counters().planner_lookups, 0u);
  EXPECT_EQ(n.counters().naive_rollouts, 24u);
}

TEST(Session, WarmupQueriesAreRandom) {
  const auto& t = shipped_task("taro");
  ScriptedAnswerer a({Choice::left, Choice::right});
  const auto r = run_session(t, config(Method::naive, SynthesisMode::synth, 10, 3, 4), a, nullptr);
  for (const auto& q : r.log) EXPECT_EQ(q.random, q.index < 4);
}

TEST(Session, Deterministic) {
  const auto& t = shipped_task("taro");
  PreferenceModel m;
  m.w_star = WeightVector({0.9});
  for (Method meth : {Method::pcpbo, Method::naive}) {
    SimulatedUser u1(t, m, UncertainConfig{}, 8), u2(t, m, UncertainConfig{}, 8);
    const auto cfg = config(meth, SynthesisMode::synth, 25, 44);
    EXPECT_EQ(run_session(t, cfg, u1, shared_cache()), run_session(t, cfg, u2, shared_cache()));
  }
}

TEST(Session, IdealUserConverges) {
  const auto& t = shipped_task("taro");
  for (double ws : {0.1, 0.5, 0.9}) {
    PreferenceModel m;
    m.w_star = WeightVector({ws});
    SimulatedUser u(t, m, std::nullopt, 1);
    const auto r = run_session(t, config(Method::pcpbo, SynthesisMode::synth, 50, 6), u, shared_cache());
    EXPECT_LE(w_distance(r.final_w, m.w_star), 0.1) << "w* " << ws;
  }
}

TEST(Session, EstimateRules) {
  WeightGrid g(1, 5);
  EXPECT_EQ(estimate(fit_posterior({}, GpHyperparams{}, g)), 0u);
  ComparisonDataset d;
  for (std::size_t j : {0u, 1u, 2u, 4u}) d.add({j, 3, 1});
  const auto q = fit_posterior(d, GpHyperparams{}, g);
  EXPECT_EQ(estimate(q), 3u);
  const GaussianApprox shifted(q.mean().array() + 5.0, q.covariance());
  EXPECT_EQ(estimate(shifted), estimate(q));
}

TEST(Session, Metrics) {
  const auto& t = shipped_task("taro");
  const auto grid = t.grid();
  SessionResult r;
  r.trajectory = {10, 10, 10};
  r.log.resize(3);
  const auto m = metrics(r, grid, grid.point(10));
  EXPECT_EQ(m.distance, std::vector<double>(3, 0.0));
  EXPECT_EQ(m.skip_rate, 0.0);
  ScriptedAnswerer a({Choice::skip, Choice::left});
  const auto rr = run_session(t, config(Method::naive, SynthesisMode::synth, 6, 1), a, nullptr);
  const auto mm = metrics(rr, grid, WeightVector({0.5}));
  EXPECT_EQ(mm.distance.size(), rr.trajectory.size());
  EXPECT_DOUBLE_EQ(mm.skip_rate, 0.5);
}

TEST(Session, ReplayReproducesResult) {
  const auto& t = shipped_task("shrimp");
  PreferenceModel m;
  m.w_star = WeightVector({0.2, 0.6});
  SimulatedUser u(t, m, UncertainConfig{20.0, 50.0, true}, 3);
  auto cfg = config(Method::pcpbo, SynthesisMode::synth, 15, 12);
  cfg.source = CandidateSource::random_restart;
  std::stringstream log;
  const auto r = run_session(t, cfg, u, shared_cache(), &log);

  std::stringstream copy(log.str());
  const auto s = replay_session(copy, t, shared_cache());
  EXPECT_TRUE(s->finished());
  EXPECT_EQ(s->result(), r);
  EXPECT_EQ(s->config(), cfg);

  // a partial log resumes mid-session
  std::string text = log.str();
  std::string partial;
  std::istringstream lines(text);
  std::string line;
  for (int k = 0; k < 6 && std::getline(lines, line); ++k) partial += line + "\n";
  std::stringstream ps(partial);
  const auto resumed = replay_session(ps, t, shared_cache());
  EXPECT_EQ(resumed->round(), 5);

  std::stringstream wrong(text);
  EXPECT_THROW(replay_session(wrong, shipped_task("taro"), shared_cache()), ConfigError);
}

TEST(Session, ReplayDetectsDivergence) {
  const auto& t = shipped_task("taro");
  ScriptedAnswerer a({Choice::left});
  std::stringstream log;
  run_session(t, config(Method::naive, SynthesisMode::synth, 3, 1), a, nullptr, &log);
  std::string text = log.str();
  const auto pos = text.find("\"i0\":");
  ASSERT_NE(pos, std::string::npos);
  text.insert(pos + 5, "1");  // corrupt the first recorded index
  std::stringstream bad(text);
  EXPECT_THROW(replay_session(bad, t, nullptr), ConfigError);
}
