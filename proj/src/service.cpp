#include "pcpbo/service.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <fmt/core.h>

#include "pcpbo/rule_map.hpp"
#include "pcpbo/settle.hpp"

// after Eigen: resolv.h defines _res
#include "httplib.h"

namespace pcpbo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Reply error(int status, const std::string& msg) { return {status, json{{"error", msg}}}; }

json w_json(const WeightVector& w) { return w.components(); }

}  // namespace

json to_json(const SessionResult& r) {
  json data = json::array();
  for (const auto& c : r.dataset.records())
    data.push_back({{"i0", c.i0},
                    {"i1", c.i1},
                    {"y", c.y},
                    {"provenance", to_string(c.provenance)},
                    {"timestamp", c.timestamp}});
  json log = json::array();
  for (const auto& q : r.log)
    log.push_back({{"index", q.index},
                   {"i0", q.i0},
                   {"i1", q.i1},
                   {"random", q.random},
                   {"redraws", q.redraws},
                   {"choice", to_string(q.choice)},
                   {"synthesized", q.synthesized},
                   {"latency_ms", q.latency_ms}});
  return {{"trajectory", r.trajectory},
          {"final_estimate", r.final_estimate},
          {"final_w", w_json(r.final_w)},
          {"skip_count", r.skip_count},
          {"dataset", std::move(data)},
          {"log", std::move(log)}};
}

SessionResult session_result_from_json(const json& j) {
  SessionResult r;
  r.trajectory = j.at("trajectory").get<std::vector<std::size_t>>();
  r.final_estimate = j.at("final_estimate").get<std::size_t>();
  r.final_w = WeightVector(j.at("final_w").get<std::vector<double>>());
  r.skip_count = j.at("skip_count").get<int>();
  for (const auto& c : j.at("dataset"))
    r.dataset.add({c.at("i0").get<std::size_t>(), c.at("i1").get<std::size_t>(), c.at("y").get<int>(),
                   provenance_from_string(c.at("provenance").get<std::string>()),
                   c.at("timestamp").get<std::int64_t>()});
  for (const auto& q : j.at("log")) {
    QueryRecord rec;
    rec.index = q.at("index").get<int>();
    rec.i0 = q.at("i0").get<std::size_t>();
    rec.i1 = q.at("i1").get<std::size_t>();
    rec.random = q.at("random").get<bool>();
    rec.redraws = q.at("redraws").get<int>();
    rec.choice = choice_from_string(q.at("choice").get<std::string>());
    rec.synthesized = q.at("synthesized").get<int>();
    rec.latency_ms = q.value("latency_ms", 0.0);
    r.log.push_back(rec);
  }
  return r;
}

SessionService::SessionService(std::vector<TaskDefinition> tasks, std::shared_ptr<PlanCache> cache,
                               ServiceOptions opts)
    : cache_(std::move(cache)), opts_(std::move(opts)) {
  for (auto& t : tasks) {
    const std::string id = t.task_id;
    tasks_[id] = std::make_unique<TaskDefinition>(std::move(t));
  }
  if (!cache_) cache_ = std::make_shared<PlanCache>();
  if (!opts_.persist_dir.empty()) fs::create_directories(opts_.persist_dir);
}

const TaskDefinition* SessionService::find_task(const std::string& task_id) const {
  auto it = tasks_.find(task_id);
  return it == tasks_.end() ? nullptr : it->second.get();
}

std::shared_ptr<SessionService::Live> SessionService::find(const std::string& id) {
  std::lock_guard lock(registry_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::string SessionService::next_id() { return fmt::format("s{:04d}", counter_++); }

void SessionService::append(const std::string& path, const std::string& line) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) throw Error("cannot append to " + path);
}

SceneState SessionService::best_state(const Session& s, std::size_t index) {
  const auto& task = s.task();
  if (s.config().method == Method::naive)
    return rollout(task, task.initial, reference_actions(task.grid().point(index), task));
  return cache_->best(task, index)->best_state;
}

Reply SessionService::tasks() const {
  json out = json::array();
  for (const auto& [id, t] : tasks_)
    out.push_back({{"task_id", id}, {"dims", t->weight_dims()}, {"grid_size", t->grid().size()}});
  return {200, {{"tasks", out}}};
}

Reply SessionService::create(const json& body) {
  SessionConfig cfg;
  const TaskDefinition* task = nullptr;
  try {
    task = find_task(body.at("task").get<std::string>());
    if (!task) return error(404, "unknown task");
    cfg.method = method_from_string(body.value("method", "pcpbo"));
    cfg.mode = mode_from_string(body.value("mode", "synth"));
    cfg.n_queries = body.value("N", 50);
    cfg.n_init = body.value("n_init", task->acquisition.n_init);
    cfg.seed = body.value("seed", std::uint64_t{0});
    cfg.source = opts_.source;
    cfg.validate();
  } catch (const json::exception& e) {
    return error(400, e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  } catch (const ConfigError& e) {
    return error(400, e.what());
  }

  auto live = std::make_shared<Live>();
  live->session = std::make_unique<Session>(*task, cfg, cache_);
  std::string id;
  {
    std::lock_guard lock(registry_mu_);
    id = next_id();
    sessions_[id] = live;
  }
  if (!opts_.persist_dir.empty()) {
    live->log_path = (fs::path(opts_.persist_dir) / (id + ".jsonl")).string();
    live->meta_path = (fs::path(opts_.persist_dir) / (id + ".meta.jsonl")).string();
    std::lock_guard lock(live->mu);
    append(live->log_path, live->session->log_header());
  }
  return {201, {{"session_id", id}}};
}

Reply SessionService::query(const std::string& id) {
  auto live = find(id);
  if (!live) return error(404, "unknown session");
  std::lock_guard lock(live->mu);
  Session& s = *live->session;
  if (s.finished()) return error(409, "session finished");
  const PendingQuery* q = nullptr;
  try {
    q = &s.current_query();
  } catch (const PlanningError& e) {
    return error(500, e.what());
  }
  if (live->served_at < 0) live->served_at = now_ms();
  json ref = nullptr;
  if (live->reference)
    ref = to_json(render(best_state(s, *live->reference), s.task(), opts_.view, true));
  return {200,
          {{"query_index", q->index},
           {"N", s.config().n_queries},
           {"left", to_json(render(q->first, s.task(), opts_.view))},
           {"right", to_json(render(q->second, s.task(), opts_.view))},
           {"reference", std::move(ref)}}};
}

Reply SessionService::answer(const std::string& id, const json& body) {
  auto live = find(id);
  if (!live) return error(404, "unknown session");
  Choice c;
  std::optional<int> index;
  try {
    c = choice_from_string(body.at("choice").get<std::string>());
    if (body.contains("query_index")) index = body.at("query_index").get<int>();
  } catch (const json::exception& e) {
    return error(400, e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  }

  std::lock_guard lock(live->mu);
  Session& s = *live->session;
  if (s.finished()) return error(409, "session finished");
  if (index && *index != s.round()) return error(409, "answer is for a stale query");
  if (c == Choice::skip && s.config().mode == SynthesisMode::noskip)
    return error(400, "skip is not available in noskip mode");
  const double latency = live->served_at < 0 ? 0.0 : now_ms() - live->served_at;
  try {
    s.answer(c, latency);
  } catch (const PlanningError& e) {
    return error(500, e.what());
  }
  live->served_at = -1.0;
  append(live->log_path, Session::log_line(s.result().log.back()));
  return {200, {{"accepted", true}, {"next_available", !s.finished()}, {"query_index", s.round()}}};
}

Reply SessionService::estimate(const std::string& id) {
  auto live = find(id);
  if (!live) return error(404, "unknown session");
  std::lock_guard lock(live->mu);
  Session& s = *live->session;
  const auto grid = s.task().grid();
  const std::size_t k = s.current_estimate();
  json traj = json::array();
  for (std::size_t t : s.trajectory()) traj.push_back(w_json(grid.point(t)));
  return {200,
          {{"w", w_json(grid.point(k))},
           {"index", k},
           {"rendered", to_json(render(best_state(s, k), s.task(), opts_.view))},
           {"trajectory", std::move(traj)},
           {"finished", s.finished()}}};
}

Reply SessionService::likert(const std::string& id, const json& body) {
  auto live = find(id);
  if (!live) return error(404, "unknown session");
  json rec{{"type", "likert"}};
  for (const char* key : {"q1", "q2", "q3", "q4"}) {
    if (!body.contains(key) || !body[key].is_number_integer())
      return error(400, fmt::format("{} must be an integer 1..7", key));
    const int v = body[key].get<int>();
    if (v < 1 || v > 7) return error(400, fmt::format("{} must be an integer 1..7", key));
    rec[key] = v;
  }
  std::lock_guard lock(live->mu);
  live->likert.push_back(rec);
  append(live->meta_path, rec.dump());
  return {200, {{"stored", true}, {"count", live->likert.size()}}};
}

Reply SessionService::catalog(const std::string& id, std::size_t offset, std::size_t limit) {
  auto live = find(id);
  if (!live) return error(404, "unknown session");
  std::lock_guard lock(live->mu);
  const TaskDefinition& task = live->session->task();
  const auto grid = task.grid();
  json items = json::array();
  const std::size_t end = std::min(grid.size(), offset + limit);
  for (std::size_t i = offset; i < end; ++i) {
    const auto best = cache_->best(task, i);
    items.push_back({{"index", i},
                     {"w", w_json(grid.point(i))},
                     {"cost", best->best_cost},
                     {"rendered", to_json(render(best->best_state, task, opts_.view))}});
  }
  return {200, {{"total", grid.size()}, {"offset", offset}, {"candidates", std::move(items)}}};
}

Reply SessionService::set_reference(const std::string& id, const json& body) {
  auto live = find(id);
  if (!live) return error(404, "unknown session");
  std::lock_guard lock(live->mu);
  const TaskDefinition& task = live->session->task();
  const auto grid = task.grid();
  std::size_t index = 0;
  try {
    if (body.contains("index")) {
      index = body.at("index").get<std::size_t>();
      if (index >= grid.size()) return error(400, "index outside the grid");
    } else {
      auto w = body.at("w").get<std::vector<double>>();
      if (static_cast<int>(w.size()) != task.weight_dims()) return error(400, "w has the wrong dimension");
      for (double v : w)
        if (!(v >= 0.0 && v <= 1.0)) return error(400, "w must lie in [0, 1]");
      index = grid.nearest(WeightVector(w));
    }
  } catch (const json::exception& e) {
    return error(400, e.what());
  }
  live->reference = index;
  append(live->meta_path, json{{"type", "reference"}, {"index", index}}.dump());
  return {200, {{"index", index}, {"w", w_json(grid.point(index))}}};
}

Reply SessionService::result(const std::string& id) {
  auto live = find(id);
  if (!live) return error(404, "unknown session");
  std::lock_guard lock(live->mu);
  return {200, to_json(live->session->result())};
}

std::size_t SessionService::resume() {
  if (opts_.persist_dir.empty() || !fs::exists(opts_.persist_dir)) return 0;
  std::vector<fs::path> logs;
  for (const auto& e : fs::directory_iterator(opts_.persist_dir)) {
    const auto name = e.path().filename().string();
    if (name.ends_with(".jsonl") && !name.ends_with(".meta.jsonl")) logs.push_back(e.path());
  }
  std::sort(logs.begin(), logs.end());
  std::size_t restored = 0;
  for (const auto& p : logs) {
    const std::string id = p.stem().string();
    std::ifstream in(p);
    std::string header;
    if (!std::getline(in, header)) continue;
    const json h = json::parse(header, nullptr, false);
    if (h.is_discarded()) continue;
    const TaskDefinition* task = find_task(h.value("task", ""));
    if (!task) continue;
    in.clear();
    in.seekg(0);
    auto live = std::make_shared<Live>();
    live->session = replay_session(in, *task, cache_);
    live->log_path = p.string();
    live->meta_path = (fs::path(opts_.persist_dir) / (id + ".meta.jsonl")).string();
    std::ifstream meta(live->meta_path);
    for (std::string line; std::getline(meta, line);) {
      const json m = json::parse(line, nullptr, false);
      if (m.is_discarded()) continue;
      if (m.value("type", "") == "reference") live->reference = m.at("index").get<std::size_t>();
      if (m.value("type", "") == "likert") live->likert.push_back(m);
    }
    std::lock_guard lock(registry_mu_);
    sessions_[id] = live;
    int n = 0;
    if (id.size() > 1) std::from_chars(id.data() + 1, id.data() + id.size(), n);
    counter_ = std::max(counter_, n + 1);
    ++restored;
  }
  return restored;
}

void SessionService::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req, json& out) {
    out = json::parse(req.body, nullptr, false);
    return !out.is_discarded() && out.is_object();
  };
  auto bad_json = Reply{400, json{{"error", "body must be a JSON object"}}};

  server.Get("/tasks", [this, send](const httplib::Request&, httplib::Response& res) { send(res, tasks()); });
  server.Post("/sessions", [=, this](const httplib::Request& req, httplib::Response& res) {
    json body;
    send(res, parse(req, body) ? create(body) : bad_json);
  });
  server.Get("/sessions/:id/query", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, query(req.path_params.at("id")));
  });
  server.Post("/sessions/:id/answer", [=, this](const httplib::Request& req, httplib::Response& res) {
    json body;
    send(res, parse(req, body) ? answer(req.path_params.at("id"), body) : bad_json);
  });
  server.Get("/sessions/:id/estimate", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, estimate(req.path_params.at("id")));
  });
  server.Post("/sessions/:id/likert", [=, this](const httplib::Request& req, httplib::Response& res) {
    json body;
    send(res, parse(req, body) ? likert(req.path_params.at("id"), body) : bad_json);
  });
  server.Get("/sessions/:id/catalog", [=, this](const httplib::Request& req, httplib::Response& res) {
    std::size_t offset = 0, limit = static_cast<std::size_t>(-1);
    try {
      if (req.has_param("offset")) offset = std::stoul(req.get_param_value("offset"));
      if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
    } catch (const std::exception&) {
      return send(res, Reply{400, json{{"error", "offset and limit must be integers"}}});
    }
    send(res, catalog(req.path_params.at("id"), offset, limit));
  });
  server.Post("/sessions/:id/reference", [=, this](const httplib::Request& req, httplib::Response& res) {
    json body;
    send(res, parse(req, body) ? set_reference(req.path_params.at("id"), body) : bad_json);
  });
  server.Get("/sessions/:id/result", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, result(req.path_params.at("id")));
  });
}

std::pair<std::string, int> bind_address(const char* env_value) {
  std::string v = env_value ? env_value : "";
  if (v.empty()) return {"127.0.0.1", 8080};
  const auto colon = v.rfind(':');
  if (colon == std::string::npos) throw ConfigError("PCPBO_BIND must look like host:port");
  int port = 0;
  const auto* first = v.data() + colon + 1;
  const auto [ptr, ec] = std::from_chars(first, v.data() + v.size(), port);
  if (ec != std::errc{} || ptr != v.data() + v.size() || port < 0 || port > 65535)
    throw ConfigError("PCPBO_BIND has a bad port: " + v);
  return {v.substr(0, colon), port};
}

}  // namespace pcpbo
