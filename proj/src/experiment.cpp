#include "pcpbo/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/core.h>

#include "json.hpp"

#include "pcpbo/random.hpp"
#include "pcpbo/rule_map.hpp"
#include "pcpbo/settle.hpp"

namespace pcpbo {

using nlohmann::json;

std::vector<UserFixture> parse_users(const std::string& json_text, const TaskDefinition& task) {
  std::vector<UserFixture> out;
  try {
    const json j = json::parse(json_text);
    for (const auto& u : j.at("users")) {
      UserFixture f;
      f.name = u.at("name").get<std::string>();
      f.w_star = WeightVector(u.at("w_star").get<std::vector<double>>());
      if (static_cast<int>(f.w_star.size()) != task.weight_dims())
        throw ConfigError(fmt::format("user {}: w_star has {} components, task {} needs {}", f.name,
                                      f.w_star.size(), task.task_id, task.weight_dims()));
      for (double v : f.w_star.components())
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("user " + f.name + ": w_star outside [0, 1]");
      if (u.contains("uncertain") && !u["uncertain"].is_null()) {
        UncertainConfig c;
        c.t0 = u["uncertain"].value("t0", c.t0);
        c.t1 = u["uncertain"].value("t1", c.t1);
        c.validate();
        f.uncertain = c;
      }
      out.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad users file: ") + e.what());
  }
  if (out.empty()) throw ConfigError("users file lists no users");
  return out;
}

std::vector<UserFixture> load_users(const std::string& path, const TaskDefinition& task) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open users file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_users(ss.str(), task);
}

std::uint64_t session_seed(std::uint64_t base, std::size_t user, int trial) {
  return derive_seed(base, {user, static_cast<std::uint64_t>(trial), 1});
}

std::uint64_t user_seed(std::uint64_t base, std::size_t user, int trial) {
  return derive_seed(base, {user, static_cast<std::uint64_t>(trial), 2});
}

std::vector<TrialSummary> run_experiment(const TaskDefinition& task, const ExperimentSpec& spec,
                                         std::shared_ptr<PlanCache> cache, std::ostream& csv) {
  if (spec.trials < 1) throw ConfigError("trials must be at least 1");
  const auto grid = task.grid();
  std::vector<TrialSummary> out;
  csv << kCsvHeader << '\n';
  for (Method method : spec.methods) {
    for (SynthesisMode mode : spec.modes) {
      for (std::size_t u = 0; u < spec.users.size(); ++u) {
        const auto& user = spec.users[u];
        for (int t = 0; t < spec.trials; ++t) {
          SessionConfig cfg;
          cfg.method = method;
          cfg.mode = mode;
          cfg.n_queries = spec.n_queries;
          cfg.n_init = spec.n_init;
          cfg.seed = session_seed(spec.seed, u, t);
          auto uncertain = user.uncertain;
          // without skipping the uncertain branches answer at random
          if (uncertain) uncertain->skip_enabled = mode != SynthesisMode::noskip;
          PreferenceModel pm;
          pm.w_star = user.w_star;
          SimulatedUser answerer(task, pm, uncertain, user_seed(spec.seed, u, t));
          const auto r = run_session(task, cfg, answerer, cache);
          const auto m = metrics(r, grid, user.w_star);
          for (std::size_t k = 0; k < r.log.size(); ++k)
            csv << fmt::format("{},{},{},{},{},{},{:.6f},{},{}\n", task.task_id, to_string(method),
                               to_string(mode), user.name, t, k + 1, m.distance[k],
                               r.log[k].choice == Choice::skip ? 1 : 0, cfg.seed);
          out.push_back({method, mode, user.name, t, cfg.seed, m.distance.back(), m.skip_rate});
        }
      }
    }
  }
  csv.flush();
  return out;
}

FeasibilityReport check_planner_feasibility(const TaskDefinition& task, PlanCache& cache,
                                            double tolerance) {
  const auto grid = task.grid();
  FeasibilityReport rep;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto w = grid.point(i);
    const auto best = cache.best(task, i);
    const auto inv = check_invariants(best->best_state);
    const double naive = arrangement_cost(rollout(task, task.initial, reference_actions(w, task)), w, task);
    ++rep.points;
    rep.worst_penetration = std::max(rep.worst_penetration, inv.max_penetration);
    rep.worst_margin = std::max(rep.worst_margin, best->best_cost - naive);
    if (!inv.ok(tolerance))
      rep.failures.push_back(fmt::format("g{}: penetration {:.3g}, {} unsupported", i, inv.max_penetration,
                                         inv.unsupported.size()));
    if (best->best_cost > naive)
      rep.failures.push_back(fmt::format("g{}: plan cost {:.6g} above naive {:.6g}", i, best->best_cost, naive));
  }
  return rep;
}

}  // namespace pcpbo
