#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"

#include "cgi/orchestrator.hpp"

namespace cgi {

// Effective run configuration. File values load first; command-line flags
// override; credentials only ever come from environment variables
// (ACTOR_ENDPOINT, ACTOR_KEY, CRITIC_ENDPOINT, CRITIC_KEY).
struct RunConfig {
  // [env]
  std::string env_type = "craftsim";  // craftsim | bridge
  std::string tasks_file;
  std::string bridge_endpoint;  // cmd:... | tcp:host:port
  int max_steps = 0;

  // [actor]
  std::string actor_backend = "scripted";  // scripted | remote
  int m_candidates = 5;
  double temperature = 1.0;
  double fidelity = 1.0;
  std::string actor_model = "default";
  int max_inflight = 8;  // concurrent remote requests

  // [critic]
  std::string critic_kind = "oracle";  // oracle | remote | none
  bool expert_prompts = true;
  double critic_flip_prob = 0.0;
  std::string critic_model = "default";

  // [run]
  std::uint64_t seed = 0;
  int workers = 4;
  int rounds = 3;  // K
  std::optional<double> beta;
  std::string general_file;
  std::optional<int> mix_total;
  std::string hook_command;
  bool critique_per_step = true;

  nlohmann::json to_json() const;
};

// Minimal [section] / key = value document. Strings may be quoted; `#`
// starts a comment. Unknown keys are an error so typos fail loudly.
RunConfig load_config_file(const std::string& path);
void apply_config_entry(RunConfig& config, const std::string& section,
                        const std::string& key, const std::string& value);

// Translates the file-level fields into the orchestrator's episode config.
EpisodeConfig episode_config(const RunConfig& config);

// Checks invariants (M >= 1, K >= 1, referenced files exist, backend
// combinations make sense); throws Error with a usage-style message.
void validate_config(const RunConfig& config, bool for_iterate);

}  // namespace cgi
