#pragma once

#include <map>
#include <memory>
#include <string>

#include "pcpbo/cem.hpp"
#include "pcpbo/scene.hpp"

// Shipped tasks, loaded once per test binary.
inline const pcpbo::TaskDefinition& shipped_task(const std::string& name) {
  static std::map<std::string, pcpbo::TaskDefinition> tasks;
  auto it = tasks.find(name);
  if (it == tasks.end())
    it = tasks.emplace(name, pcpbo::load_task(std::string(PCPBO_SOURCE_DIR) + "/tasks/" + name + ".json")).first;
  return it->second;
}

// Disk-backed plan cache shared by the test binaries and the acceptance run.
inline std::shared_ptr<pcpbo::PlanCache> shared_cache() {
  static auto cache = std::make_shared<pcpbo::PlanCache>(PCPBO_CACHE_DIR);
  return cache;
}
