#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "cgi/craftsim.hpp"
#include "cgi/trajectory.hpp"

namespace cgi {

// Episode-facing environment surface. The built-in crafting simulator and
// remote environments behind the bridge both sit behind this.
class TextEnv {
 public:
  virtual ~TextEnv() = default;
  virtual Observation reset(const std::string& task_id, std::uint64_t seed) = 0;
  virtual Observation step(const std::string& task_id, const std::string& command) = 0;
};

// In-process crafting environment bound to a single task.
class LocalCraftEnv : public TextEnv {
 public:
  LocalCraftEnv(craft::CraftTask task, craft::CraftConfig cfg = {})
      : env_(std::move(task), cfg) {}

  Observation reset(const std::string& task_id, std::uint64_t seed) override {
    check_task(task_id);
    return env_.reset(seed);
  }

  Observation step(const std::string& task_id, const std::string& command) override {
    check_task(task_id);
    return env_.step_command(command);
  }

  const craft::CraftEnv& env() const { return env_; }

 private:
  void check_task(const std::string& task_id) const {
    if (task_id != env_.task().instruction.task_id) {
      throw Error("env bound to task " + env_.task().instruction.task_id +
                  ", got " + task_id);
    }
  }

  craft::CraftEnv env_;
};

}  // namespace cgi
