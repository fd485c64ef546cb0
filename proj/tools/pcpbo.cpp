// Command-line entry points: simulate, plan, serve, validate-task, precompute.
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <fmt/core.h>

#include "CLI11.hpp"

#include "pcpbo/experiment.hpp"
#include "pcpbo/rule_map.hpp"
#include "pcpbo/service.hpp"
#include "pcpbo/settle.hpp"

// after Eigen: resolv.h defines _res
#include "httplib.h"

namespace fs = std::filesystem;
using namespace pcpbo;

namespace {

WeightVector parse_w(const std::string& text, const TaskDefinition& task) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) v.push_back(std::stod(part));
  if (static_cast<int>(v.size()) != task.weight_dims())
    throw ConfigError(fmt::format("--w needs {} comma-separated values", task.weight_dims()));
  for (double x : v)
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("--w components must lie in [0, 1]");
  return WeightVector(v);
}

int cmd_simulate(const std::string& task_path, const std::vector<std::string>& methods,
                 const std::vector<std::string>& modes, const std::string& users_path, int trials, int n,
                 std::uint64_t seed, const std::string& out_dir, const std::string& cache_dir) {
  const auto task = load_task(task_path);
  ExperimentSpec spec;
  spec.methods.clear();
  for (const auto& m : methods) spec.methods.push_back(method_from_string(m));
  spec.modes.clear();
  for (const auto& m : modes) spec.modes.push_back(mode_from_string(m));
  spec.users = load_users(users_path, task);
  spec.trials = trials;
  spec.n_queries = n;
  spec.n_init = task.acquisition.n_init;
  spec.seed = seed;

  fs::create_directories(out_dir);
  const auto csv_path = fs::path(out_dir) / fmt::format("simulate_{}.csv", task.task_id);
  std::ofstream csv(csv_path);
  if (!csv) throw ConfigError("cannot write " + csv_path.string());
  auto cache = std::make_shared<PlanCache>(cache_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_experiment(task, spec, cache, csv);

  // mean final distance and skip rate per condition
  struct Acc {
    double dist = 0, skip = 0;
    int n = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& r : rows) {
    auto& a = acc[fmt::format("{:<6} {:<7} {}", to_string(r.method), to_string(r.mode), r.user)];
    a.dist += r.final_distance;
    a.skip += r.skip_rate;
    ++a.n;
  }
  for (const auto& [k, a] : acc)
    fmt::print("{}  final distance {:.4f}  skip rate {:.3f}\n", k, a.dist / a.n, a.skip / a.n);
  fmt::print("wrote {} ({:.1f} s)\n", csv_path.string(),
             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

int cmd_plan(const std::string& task_path, const std::string& w_text, std::uint64_t seed,
             const std::string& out) {
  const auto task = load_task(task_path);
  const auto w = parse_w(w_text, task);
  const auto grid = task.grid();
  const std::size_t idx = grid.nearest(w);
  const auto r = plan(task, task.initial, w, task.cem, seed);
  const auto naive = rollout(task, task.initial, reference_actions(w, task));
  const auto inv = check_invariants(r.best_state);
  for (std::size_t k = 0; k < r.best_actions.size(); ++k)
    fmt::print("action {}  x {:.5f}  y {:.5f}  yaw {:.4f}\n", k, r.best_actions[k].x, r.best_actions[k].y,
               r.best_actions[k].yaw);
  fmt::print("cost {:.6g} (naive {:.6g})\n", r.best_cost, arrangement_cost(naive, w, task));
  fmt::print("penetration {:.3g}  unsupported {}  rule violations {}\n", inv.max_penetration,
             inv.unsupported.size(), rule_violations(r.best_state, task));
  if (!out.empty()) {
    std::ofstream os(out);
    write_plan_record(os, task.task_id, idx, r);
    fmt::print("wrote {}\n", out);
  }
  return inv.ok(1e-4) ? 0 : 1;
}

int cmd_validate(const std::vector<std::string>& paths) {
  int bad = 0;
  for (const auto& p : paths) {
    try {
      const auto task = load_task(p);
      const auto rep = validate_template(task);
      fmt::print("{}: {} grid points, min gap {:.4g}, lipschitz {:.3g} -> {}\n", task.task_id,
                 rep.grid_points, rep.min_gap, rep.lipschitz, rep.ok() ? "ok" : "FAILED");
      for (const auto& f : rep.failures) fmt::print("  {}\n", f);
      if (!rep.ok()) ++bad;
    } catch (const std::exception& e) {
      fmt::print(stderr, "{}: {}\n", p, e.what());
      ++bad;
    }
  }
  return bad == 0 ? 0 : 1;
}

int cmd_precompute(const std::string& task_path, const std::string& cache_dir) {
  const auto task = load_task(task_path);
  PlanCache cache(cache_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = check_planner_feasibility(task, cache);
  fmt::print("{}: {} points x {} restarts, {} computed, {} loaded ({:.1f} s)\n", task.task_id, rep.points,
             task.cem.restarts, cache.computed(), cache.loaded(),
             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  fmt::print("worst penetration {:.3g}, worst cost margin over naive {:.3g}\n", rep.worst_penetration,
             rep.worst_margin);
  for (const auto& f : rep.failures) fmt::print("  {}\n", f);
  return rep.ok() ? 0 : 1;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::vector<std::string>& task_paths, const std::string& cache_dir,
              const std::string& persist_dir, int port_override) {
  std::vector<TaskDefinition> tasks;
  for (const auto& p : task_paths) tasks.push_back(load_task(p));
  ServiceOptions opts;
  opts.persist_dir = persist_dir;
  SessionService service(std::move(tasks), std::make_shared<PlanCache>(cache_dir), opts);
  const auto restored = service.resume();
  auto [host, port] = bind_address(std::getenv("PCPBO_BIND"));
  if (port_override >= 0) port = port_override;

  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  if (port == 0) port = server.bind_to_any_port(host);
  else if (!server.bind_to_port(host, port)) throw ConfigError(fmt::format("cannot bind {}:{}", host, port));
  fmt::print("serving on {}:{} ({} sessions restored)\n", host, port, restored);
  std::fflush(stdout);
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physically consistent preference-based optimization"};
  app.require_subcommand(1);

  std::string task_path, users_path, out_dir = "out", cache_dir = "cache", w_text, plan_out, persist_dir;
  std::vector<std::string> methods{"pcpbo", "naive"}, modes{"synth"}, task_paths;
  int trials = 10, n_queries = 50, port = -1;
  std::uint64_t seed = 0;

  auto* sim = app.add_subcommand("simulate", "batch simulated-user experiments -> CSV");
  sim->add_option("--task", task_path, "task JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--method", methods, "pcpbo and/or naive")->capture_default_str();
  sim->add_option("--mode", modes, "synth, skip and/or noskip")->capture_default_str();
  sim->add_option("--users", users_path, "users JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--trials", trials)->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--queries", n_queries, "queries per session")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed)->capture_default_str();
  sim->add_option("--out", out_dir, "output directory")->capture_default_str();
  sim->add_option("--cache", cache_dir, "plan cache directory")->capture_default_str();

  auto* pl = app.add_subcommand("plan", "one lower-level solve");
  pl->add_option("--task", task_path)->required()->check(CLI::ExistingFile);
  pl->add_option("--w", w_text, "weights, comma separated")->required();
  pl->add_option("--seed", seed)->capture_default_str();
  pl->add_option("--out", plan_out, "write the plan record here");

  auto* srv = app.add_subcommand("serve", "HTTP session service (bind address from PCPBO_BIND)");
  srv->add_option("--task", task_paths, "task JSON, repeatable")->required()->check(CLI::ExistingFile);
  srv->add_option("--cache", cache_dir)->capture_default_str();
  srv->add_option("--out", persist_dir, "session log directory");
  srv->add_option("--port", port, "override the port (0 = any free port)");

  auto* val = app.add_subcommand("validate-task", "rule-map checks");
  val->add_option("--task", task_paths, "task JSON, repeatable")->required()->check(CLI::ExistingFile);

  auto* pre = app.add_subcommand("precompute", "fill the plan cache for every grid point");
  pre->add_option("--task", task_path)->required()->check(CLI::ExistingFile);
  pre->add_option("--cache", cache_dir)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(task_path, methods, modes, users_path, trials, n_queries, seed, out_dir, cache_dir);
    if (*pl) return cmd_plan(task_path, w_text, seed, plan_out);
    if (*srv) return cmd_serve(task_paths, cache_dir, persist_dir, port);
    if (*val) return cmd_validate(task_paths);
    if (*pre) return cmd_precompute(task_path, cache_dir);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
