#pragma once

#include <vector>

#include "pcpbo/sim_users.hpp"

// Replays a fixed list of choices, cycling when it runs out.
class ScriptedAnswerer final : public pcpbo::Answerer {
public:
  explicit ScriptedAnswerer(std::vector<pcpbo::Choice> script) : script_(std::move(script)) {}
  pcpbo::Choice answer(const pcpbo::SceneState&, const pcpbo::SceneState&) override {
    return script_[next_++ % script_.size()];
  }

private:
  std::vector<pcpbo::Choice> script_;
  std::size_t next_ = 0;
};
