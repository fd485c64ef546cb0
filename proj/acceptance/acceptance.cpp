// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/core.h>

#include "pcpbo/experiment.hpp"
#include "pcpbo/service.hpp"
#include "support/oracles.hpp"

// after Eigen: resolv.h defines _res
#include "httplib.h"

using namespace pcpbo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 1;

std::string src(const std::string& rel) { return std::string(PCPBO_SOURCE_DIR) + "/" + rel; }

std::shared_ptr<PlanCache> cache() {
  static auto c = std::make_shared<PlanCache>(PCPBO_CACHE_DIR);
  return c;
}

const TaskDefinition& task(const std::string& name) {
  static std::map<std::string, TaskDefinition> tasks;
  auto it = tasks.find(name);
  if (it == tasks.end()) it = tasks.emplace(name, load_task(src("tasks/" + name + ".json"))).first;
  return it->second;
}

struct Verdict {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fmt::print("{} {}: {} [{:.1f} s]\n", v.pass ? "PASS" : "FAIL", name, v.detail, secs);
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// mean final distance and skip rate per (method, mode)
struct Cell {
  double dist = 0.0, skip = 0.0;
  int n = 0;
  double mean_dist() const { return dist / n; }
  double mean_skip() const { return skip / n; }
};

std::map<std::pair<Method, SynthesisMode>, Cell> run(const std::string& task_name, const std::string& users,
                                                     std::vector<Method> methods, std::vector<SynthesisMode> modes) {
  const auto& t = task(task_name);
  ExperimentSpec spec;
  spec.methods = std::move(methods);
  spec.modes = std::move(modes);
  spec.users = load_users(src(users), t);
  spec.trials = 10;
  spec.n_queries = 50;
  spec.n_init = 1;
  spec.seed = kSeed;
  std::ostringstream csv;
  std::map<std::pair<Method, SynthesisMode>, Cell> out;
  for (const auto& r : run_experiment(t, spec, cache(), csv)) {
    auto& c = out[{r.method, r.mode}];
    c.dist += r.final_distance;
    c.skip += r.skip_rate;
    ++c.n;
  }
  return out;
}

Verdict probit_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> f(-3.0, 3.0), s(0.05, 2.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double f0 = f(rng), f1 = f(rng), sigma = s(rng);
    const double want = oracle::normal_cdf_by_integration((f1 - f0) / (std::sqrt(2.0) * sigma));
    worst = std::max(worst, std::abs(pref_likelihood(f0, f1, sigma) - want));
  }
  const double secs = elapsed(t0);
  return {worst <= 1e-6 && secs < 1.0, fmt::format("max |error| {:.2e} over 1000 triples (bound 1e-6), {:.3f} s", worst, secs)};
}

Verdict posterior_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  WeightGrid g(1, 5);
  GpHyperparams hp;
  ComparisonDataset d;
  d.add({0, 2, 1});
  d.add({2, 4, 0});
  d.add({1, 3, 1});
  const auto q = fit_posterior(d, hp, g);
  oracle::Rows rows;
  for (const auto& c : d.records()) rows.push_back({static_cast<int>(c.winner()), static_cast<int>(c.loser())});
  const auto truth = oracle::posterior_by_quadrature(prior_covariance(g, hp), rows, hp.noise);
  double dm = 0.0, ds = 0.0;
  for (int i = 0; i < 5; ++i) {
    dm = std::max(dm, std::abs(q.mean()[i] - truth.mean[i]));
    ds = std::max(ds, std::abs(std::sqrt(q.variances()[i]) - truth.sd[i]));
  }
  const double secs = elapsed(t0);
  return {dm <= 0.05 && ds <= 0.05 && secs < 10.0,
          fmt::format("max mean error {:.4f}, max sd error {:.4f} (bound 0.05), {:.2f} s", dm, ds, secs)};
}

Verdict taro_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = run("taro", "experiments/users_taro.json", {Method::pcpbo, Method::naive}, {SynthesisMode::synth});
  const double p = r[{Method::pcpbo, SynthesisMode::synth}].mean_dist();
  const double n = r[{Method::naive, SynthesisMode::synth}].mean_dist();
  const double secs = elapsed(t0);
  return {p <= 0.1 && p < n && secs < 600.0,
          fmt::format("pcpbo mean final distance {:.4f} (<= 0.1), naive {:.4f}, {:.0f} s", p, n, secs)};
}

Verdict shrimp_convergence() {
  auto r = run("shrimp", "experiments/users_shrimp.json", {Method::pcpbo, Method::naive}, {SynthesisMode::synth});
  const double p = r[{Method::pcpbo, SynthesisMode::synth}].mean_dist();
  const double n = r[{Method::naive, SynthesisMode::synth}].mean_dist();
  return {p < n, fmt::format("pcpbo mean final distance {:.4f}, naive {:.4f}", p, n)};
}

Verdict ablation() {
  bool ok = true;
  std::string detail;
  for (int t1 : {50, 100}) {
    auto r = run("shrimp", fmt::format("experiments/users_shrimp_uncertain_t{}.json", t1), {Method::pcpbo},
                 {SynthesisMode::synth, SynthesisMode::skip, SynthesisMode::noskip});
    const auto& sy = r[{Method::pcpbo, SynthesisMode::synth}];
    const auto& sk = r[{Method::pcpbo, SynthesisMode::skip}];
    const auto& ns = r[{Method::pcpbo, SynthesisMode::noskip}];
    const bool order = sy.mean_dist() <= sk.mean_dist() + 0.05 && sk.mean_dist() <= ns.mean_dist() + 0.05;
    const bool rate = sy.mean_skip() < sk.mean_skip();
    ok = ok && order && rate;
    detail += fmt::format("{}t1={}: distance synth {:.4f} / skip {:.4f} / noskip {:.4f} ({}), "
                          "skip rate synth {:.3f} vs skip {:.3f} ({})",
                          detail.empty() ? "" : "; ", t1, sy.mean_dist(), sk.mean_dist(), ns.mean_dist(),
                          order ? "ordered" : "not ordered", sy.mean_skip(), sk.mean_skip(),
                          rate ? "lower" : "not lower");
  }
  return {ok, detail};
}

Verdict feasibility() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (const char* name : {"taro", "shrimp", "tempura"}) {
    const auto rep = check_planner_feasibility(task(name), *cache());
    ok = ok && rep.ok();
    detail += fmt::format("{}{} {} points, {} failures, worst penetration {:.2e}, worst margin {:.2e}",
                          detail.empty() ? "" : "; ", name, rep.points, rep.failures.size(), rep.worst_penetration,
                          rep.worst_margin);
  }
  const double secs = elapsed(t0);
  return {ok && secs < 300.0, detail + fmt::format(" ({:.0f} s)", secs)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "pcpbo_determinism";
  fs::remove_all(root);
  struct Invocation {
    std::string task, users, extra;
  };
  const std::vector<Invocation> runs{
      {"taro", "users_taro.json", "--trials 2"},
      {"shrimp", "users_shrimp_uncertain_t50.json", "--trials 1 --method pcpbo --mode synth skip noskip --queries 20"},
  };
  std::string detail;
  bool ok = true;
  for (const auto& inv : runs) {
    std::string bytes[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = root / fmt::format("{}_{}", inv.task, k);
      const std::string cmd = fmt::format("\"{}\" simulate --task \"{}\" --users \"{}\" --seed 7 --out \"{}\" --cache \"{}\" {} > /dev/null",
                                          PCPBO_CLI, src("tasks/" + inv.task + ".json"),
                                          src("experiments/" + inv.users), out.string(), PCPBO_CACHE_DIR, inv.extra);
      if (std::system(cmd.c_str()) != 0) return {false, "simulate failed: " + cmd};
      bytes[k] = slurp(out / fmt::format("simulate_{}.csv", inv.task));
    }
    const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
    ok = ok && same;
    const auto rows = std::count(bytes[0].begin(), bytes[0].end(), '\n') - 1;
    detail += fmt::format("{}{}: {} rows, {}", detail.empty() ? "" : "; ", inv.task, rows,
                          same ? "byte-identical" : "DIFFERENT");
  }
  fs::remove_all(root);
  return {ok, detail};
}

Verdict transport() {
  const auto& t = task("shrimp");
  SessionConfig cfg;
  cfg.mode = SynthesisMode::synth;
  cfg.n_queries = 50;
  cfg.seed = kSeed;
  cfg.source = CandidateSource::random_restart;  // what the service shows
  PreferenceModel m;
  m.w_star = WeightVector({0.2, 0.6});
  SimulatedUser user(t, m, UncertainConfig{20.0, 50.0, true}, kSeed);
  const auto local = run_session(t, cfg, user, cache());

  SessionService svc({task("taro"), task("shrimp")}, cache());
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);
  Verdict v{false, ""};
  [&] {
    auto created = cli.Post("/sessions",
                            json{{"task", "shrimp"}, {"method", "pcpbo"}, {"mode", "synth"}, {"N", 50}, {"seed", kSeed}}.dump(),
                            "application/json");
    if (!created || created->status != 201) return void(v.detail = "create failed");
    const auto id = json::parse(created->body)["session_id"].get<std::string>();
    for (const auto& rec : local.log) {
      auto q = cli.Get("/sessions/" + id + "/query");
      if (!q || q->status != 200 || json::parse(q->body)["query_index"] != rec.index)
        return void(v.detail = fmt::format("query {} mismatch", rec.index));
      auto a = cli.Post("/sessions/" + id + "/answer",
                        json{{"choice", to_string(rec.choice)}, {"query_index", rec.index}}.dump(), "application/json");
      if (!a || a->status != 200) return void(v.detail = fmt::format("answer {} rejected", rec.index));
    }
    auto res = cli.Get("/sessions/" + id + "/result");
    if (!res || res->status != 200) return void(v.detail = "result failed");
    const auto remote = session_result_from_json(json::parse(res->body));
    v.pass = remote == local;
    v.detail = fmt::format("50-round shrimp session ({} skips, {} records): {}", local.skip_count, local.dataset.size(),
                           v.pass ? "identical SessionResult" : "results differ");
  }();
  server.stop();
  th.join();
  return v;
}

}  // namespace

int main() {
  criterion("probit likelihood oracle", probit_oracle);
  criterion("posterior oracle equivalence", posterior_oracle);
  criterion("taro convergence with ideal users", taro_convergence);
  criterion("shrimp convergence with ideal users", shrimp_convergence);
  criterion("synthesis ablation with uncertain users", ablation);
  criterion("planner feasibility on every grid point", feasibility);
  criterion("simulate determinism", determinism);
  criterion("http transport equivalence", transport);
  fmt::print("{} of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
