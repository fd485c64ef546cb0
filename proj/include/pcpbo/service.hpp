#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pcpbo/render.hpp"
#include "pcpbo/session.hpp"

namespace httplib {
class Server;
}

namespace pcpbo {

nlohmann::json to_json(const SessionResult& r);
SessionResult session_result_from_json(const nlohmann::json& j);

/// Status code plus JSON body, independent of the transport.
struct Reply {
  int status = 200;
  nlohmann::json body;
};

struct ServiceOptions {
  std::string persist_dir;  ///< session logs; empty disables persistence
  View view = View::oblique;
  CandidateSource source = CandidateSource::random_restart;
};

/// Live sessions behind the JSON API. Each session is mutated under its own
/// lock; the registry lock is only held for lookups.
class SessionService {
public:
  SessionService(std::vector<TaskDefinition> tasks, std::shared_ptr<PlanCache> cache,
                 ServiceOptions opts = {});

  Reply create(const nlohmann::json& body);
  Reply query(const std::string& id);
  Reply answer(const std::string& id, const nlohmann::json& body);
  Reply estimate(const std::string& id);
  Reply likert(const std::string& id, const nlohmann::json& body);
  Reply catalog(const std::string& id, std::size_t offset, std::size_t limit);
  Reply set_reference(const std::string& id, const nlohmann::json& body);
  Reply result(const std::string& id);
  Reply tasks() const;

  /// Replays every persisted session log; returns how many were restored.
  std::size_t resume();

  /// Registers all routes on an httplib server.
  void mount(httplib::Server& server);

private:
  struct Live {
    std::mutex mu;
    std::unique_ptr<Session> session;
    std::optional<std::size_t> reference;
    std::vector<nlohmann::json> likert;
    std::string log_path;
    std::string meta_path;
    double served_at = -1.0;  ///< steady-clock ms when the current query was served
  };

  const TaskDefinition* find_task(const std::string& task_id) const;
  std::shared_ptr<Live> find(const std::string& id);
  std::string next_id();
  SceneState best_state(const Session& s, std::size_t index);
  void append(const std::string& path, const std::string& line);

  std::map<std::string, std::unique_ptr<TaskDefinition>> tasks_;
  std::shared_ptr<PlanCache> cache_;
  ServiceOptions opts_;

  std::mutex registry_mu_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  int counter_ = 0;
};

/// "host:port" from PCPBO_BIND, defaulting to 127.0.0.1:8080.
std::pair<std::string, int> bind_address(const char* env_value);

}  // namespace pcpbo
