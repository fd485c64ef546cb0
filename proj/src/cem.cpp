#include "pcpbo/cem.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/core.h>

#include "pcpbo/random.hpp"
#include "pcpbo/rule_map.hpp"
#include "pcpbo/settle.hpp"

namespace pcpbo {

namespace fs = std::filesystem;

double state_distance(const SceneState& a, const SceneState& b, double position_weight,
                      double angle_weight) {
  if (a.task_id != b.task_id) throw std::invalid_argument("state_distance: different tasks");
  if (a.placed.size() != b.placed.size())
    throw std::invalid_argument("state_distance: states hold different items");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.placed.size(); ++i) {
    const Pose& p = a.placed[i].pose;
    const Pose& q = b.placed[i].pose;
    if (a.placed[i].spec.id != b.placed[i].spec.id)
      throw std::invalid_argument("state_distance: states hold different items");
    const double dp[3] = {p.x - q.x, p.y - q.y, p.z - q.z};
    const double da[3] = {wrap_angle(p.roll - q.roll), wrap_angle(p.pitch - q.pitch),
                          wrap_angle(p.yaw - q.yaw)};
    for (int k = 0; k < 3; ++k) {
      sq += position_weight * position_weight * dp[k] * dp[k];
      sq += angle_weight * angle_weight * da[k] * da[k];
    }
  }
  return std::sqrt(sq);
}

double arrangement_cost(const SceneState& s, const WeightVector& w, const TaskDefinition& task) {
  if (s.task_id != task.task_id) throw std::invalid_argument("arrangement_cost: task mismatch");
  return state_distance(s, rule_target(w, task));
}

CemOutcome cem_minimize(const BatchCost& cost, const Eigen::VectorXd& mean0,
                        const Eigen::VectorXd& std0, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi, const CemConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Eigen::Index n = mean0.size();
  if (std0.size() != n || lo.size() != n || hi.size() != n)
    throw std::invalid_argument("cem_minimize: dimension mismatch");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n_elite = cfg.elite_count();

  Eigen::VectorXd mean = mean0.cwiseMax(lo).cwiseMin(hi);
  Eigen::VectorXd sd = std0.cwiseMax(0.0);

  CemOutcome out;
  out.best = mean;
  out.best_cost = std::numeric_limits<double>::infinity();

  std::vector<Eigen::VectorXd> elites;
  std::vector<double> elite_costs;

  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<Eigen::VectorXd> batch(static_cast<std::size_t>(cfg.population));
    for (int k = 0; k < cfg.population; ++k) {
      Eigen::VectorXd x(n);
      for (Eigen::Index d = 0; d < n; ++d) x[d] = mean[d] + sd[d] * normal(rng);
      if (it == 0 && k == 0) x = mean;
      batch[static_cast<std::size_t>(k)] = x.cwiseMax(lo).cwiseMin(hi);
    }
    const std::vector<double> costs = cost(batch);
    if (costs.size() != batch.size()) throw std::logic_error("cem_minimize: cost batch size");
    out.evaluations += batch.size();

    // pool = previous elites + new samples; stable order keeps ties deterministic
    std::vector<Eigen::VectorXd> pool = elites;
    std::vector<double> pool_cost = elite_costs;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      if (!std::isfinite(costs[k])) {
        ++out.invalid;
        continue;
      }
      pool.push_back(batch[k]);
      pool_cost.push_back(costs[k]);
      if (costs[k] < out.best_cost) {
        out.best_cost = costs[k];
        out.best = batch[k];
      }
    }
    if (pool.empty()) {
      out.cost_trace.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pool_cost[a] < pool_cost[b]; });
    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(n_elite), pool.size());
    elites.clear();
    elite_costs.clear();
    for (std::size_t i = 0; i < m; ++i) {
      elites.push_back(pool[order[i]]);
      elite_costs.push_back(pool_cost[order[i]]);
    }
    out.cost_trace.push_back(std::accumulate(elite_costs.begin(), elite_costs.end(), 0.0) /
                             static_cast<double>(m));

    Eigen::VectorXd emean = Eigen::VectorXd::Zero(n);
    for (const auto& e : elites) emean += e;
    emean /= static_cast<double>(m);
    Eigen::VectorXd evar = Eigen::VectorXd::Zero(n);
    for (const auto& e : elites) evar += (e - emean).cwiseAbs2();
    evar /= static_cast<double>(m);
    mean = cfg.smoothing * mean + (1.0 - cfg.smoothing) * emean;
    sd = (cfg.smoothing * sd + (1.0 - cfg.smoothing) * evar.cwiseSqrt()).cwiseMax(cfg.min_std);
  }

  if (!std::isfinite(out.best_cost))
    throw PlanningError("cem: every sample was invalid",
                        fmt::format("{} evaluations over {} iterations, all invalid",
                                    out.evaluations, cfg.iterations));
  return out;
}

namespace {

std::vector<PlacementAction> to_actions(const Eigen::VectorXd& x) {
  std::vector<PlacementAction> u(static_cast<std::size_t>(x.size() / 3));
  for (std::size_t m = 0; m < u.size(); ++m) {
    const auto i = static_cast<Eigen::Index>(3 * m);
    u[m] = {x[i], x[i + 1], x[i + 2]};
  }
  return u;
}

}  // namespace

PlanResult plan(const TaskDefinition& task, const SceneState& alpha, const WeightVector& w,
                const CemConfig& cfg, std::uint64_t seed) {
  const SceneState target = rule_target(w, task);
  const auto ref = reference_actions(w, task);
  const int n_items = task.movable_count();
  if (cfg.initial_std.size() != 3) throw ConfigError("cem: initial_std needs 3 entries");

  Eigen::VectorXd mean(3 * n_items), sd(3 * n_items), lo(3 * n_items), hi(3 * n_items);
  for (int m = 0; m < n_items; ++m) {
    const ActionBounds& b = task.bounds_for(task.movable_order[static_cast<std::size_t>(m)]);
    mean.segment<3>(3 * m) << ref[static_cast<std::size_t>(m)].x, ref[static_cast<std::size_t>(m)].y,
        ref[static_cast<std::size_t>(m)].yaw;
    sd.segment<3>(3 * m) << cfg.initial_std[0], cfg.initial_std[1], cfg.initial_std[2];
    lo.segment<3>(3 * m) << b.x_min, b.y_min, b.yaw_min;
    hi.segment<3>(3 * m) << b.x_max, b.y_max, b.yaw_max;
  }

  const BatchCost cost = [&](const std::vector<Eigen::VectorXd>& xs) {
    std::vector<double> c(xs.size(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      try {
        c[k] = state_distance(rollout(task, alpha, to_actions(xs[k])), target);
      } catch (const PlacementError&) {
        // off the plate: stays +inf
      }
    }
    return c;
  };

  CemOutcome o;
  try {
    o = cem_minimize(cost, mean, sd, lo, hi, cfg, seed);
  } catch (const PlanningError& e) {
    throw PlanningError(fmt::format("plan failed for task '{}'", task.task_id),
                        e.diagnostics());
  }
  PlanResult r;
  r.best_actions = to_actions(o.best);
  r.best_state = rollout(task, alpha, r.best_actions);
  r.best_cost = state_distance(r.best_state, target);
  r.cost_trace = std::move(o.cost_trace);
  r.seed = seed;
  return r;
}

std::uint64_t restart_seed(const CemConfig& cfg, int r) {
  return r == 0 ? cfg.seed : derive_seed(cfg.seed, {static_cast<std::uint64_t>(r)});
}

void write_plan_record(std::ostream& os, const std::string& task_id, std::size_t grid_index,
                       const PlanResult& r) {
  os << std::setprecision(17);
  os << "plan " << task_id << ' ' << grid_index << ' ' << r.seed << '\n';
  os << "cost " << r.best_cost << '\n';
  for (const auto& a : r.best_actions) os << "action " << a.x << ' ' << a.y << ' ' << a.yaw << '\n';
  os << "trace";
  for (double c : r.cost_trace) os << ' ' << c;
  os << '\n';
  write_scene_dump(os, r.best_state);
}

PlanResult read_plan_record(std::istream& is, const TaskDefinition& task) {
  PlanResult r;
  std::string line, tag;
  bool header = false, have_cost = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    ls >> tag;
    if (tag == "plan") {
      std::string tid;
      std::size_t idx = 0;
      ls >> tid >> idx >> r.seed;
      if (tid != task.task_id) throw ConfigError("plan record belongs to task " + tid);
      header = true;
    } else if (tag == "cost") {
      ls >> r.best_cost;
      have_cost = true;
    } else if (tag == "action") {
      PlacementAction a;
      ls >> a.x >> a.y >> a.yaw;
      r.best_actions.push_back(a);
    } else if (tag == "trace") {
      double c;
      while (ls >> c) r.cost_trace.push_back(c);
    }
    if (!ls && !ls.eof()) throw ConfigError("malformed plan record line: " + line);
  }
  if (!header || !have_cost || static_cast<int>(r.best_actions.size()) != task.movable_count())
    throw ConfigError("incomplete plan record");
  r.best_state = rollout(task, task.initial, r.best_actions);
  return r;
}

PlanCache::PlanCache(std::string dir) : dir_(std::move(dir)) {}

std::string PlanCache::path_for(const Key& k) const {
  return (fs::path(dir_) / std::get<0>(k) /
          fmt::format("g{}_s{}.txt", std::get<1>(k), std::get<2>(k)))
      .string();
}

std::shared_ptr<const PlanResult> PlanCache::get(const TaskDefinition& task, std::size_t grid_index,
                                                 std::uint64_t seed) {
  const Key key{task.task_id, grid_index, seed};
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }

  std::shared_ptr<const PlanResult> res;
  if (!dir_.empty()) {
    std::ifstream in(path_for(key));
    if (in) {
      try {
        auto r = std::make_shared<PlanResult>(read_plan_record(in, task));
        // a record from a different settle/template version no longer reproduces
        if (r->best_cost == arrangement_cost(r->best_state, task.grid().point(grid_index), task)) {
          res = std::move(r);
          ++loaded_;
        }
      } catch (const ConfigError&) {
      }
    }
  }
  if (!res) {
    res = std::make_shared<PlanResult>(
        plan(task, task.initial, task.grid().point(grid_index), task.cem, seed));
    ++computed_;
    if (!dir_.empty()) {
      const fs::path p = path_for(key);
      fs::create_directories(p.parent_path());
      const fs::path tmp = p.string() + ".tmp";
      {
        std::ofstream out(tmp);
        write_plan_record(out, task.task_id, grid_index, *res);
      }
      fs::rename(tmp, p);  // atomic publish
    }
  }

  std::lock_guard lock(mu_);
  auto [it, inserted] = memo_.emplace(key, res);
  return it->second;
}

std::vector<std::shared_ptr<const PlanResult>> PlanCache::restarts(const TaskDefinition& task,
                                                                   std::size_t grid_index) {
  std::vector<std::shared_ptr<const PlanResult>> out;
  for (int r = 0; r < task.cem.restarts; ++r)
    out.push_back(get(task, grid_index, restart_seed(task.cem, r)));
  return out;
}

std::shared_ptr<const PlanResult> PlanCache::best(const TaskDefinition& task, std::size_t grid_index) {
  auto all = restarts(task, grid_index);
  std::shared_ptr<const PlanResult> b = all.front();
  for (const auto& r : all)
    if (r->best_cost < b->best_cost) b = r;
  return b;
}

}  // namespace pcpbo
