#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgi/actor.hpp"
#include "cgi/craftsim.hpp"
#include "cgi/critic.hpp"
#include "cgi/env.hpp"
#include "cgi/prompts.hpp"
#include "cgi/trajectory.hpp"

namespace cgi {

enum class CriticKind { None, Oracle, Remote };

struct EpisodeConfig {
  ActorConfig actor;
  CriticKind critic = CriticKind::Oracle;
  bool expert_prompts = true;   // give remote critics the gold-path variant
  double critic_flip_prob = 0.0;
  int max_steps = 0;            // 0: 4 x oracle_length, floor 10
  std::uint64_t master_seed = 0;
  bool critique_per_step = true;  // off: the refined action is candidate 0
  int workers = 4;
};

using EnvFactory =
    std::function<std::unique_ptr<TextEnv>(const craft::CraftTask&, int max_steps)>;
using ActorFactory =
    std::function<std::unique_ptr<Actor>(const craft::CraftTask&, std::uint64_t seed)>;
using CriticFactory =
    std::function<std::unique_ptr<Critic>(const craft::CraftTask&, std::uint64_t seed)>;

struct Runtime {
  EpisodeConfig cfg;
  PromptRegistry prompts = PromptRegistry::builtin();
  EnvFactory env_factory;
  ActorFactory actor_factory;
  CriticFactory critic_factory;  // may produce nullptr (no critic)
  // Applied when a trainer hook returns a new actor endpoint.
  std::function<void(const std::string&)> apply_actor_endpoint;
};

// Scripted actor + oracle critic + in-process environment wiring.
Runtime make_local_runtime(EpisodeConfig cfg);

// Reproducible per-episode stream: hash of master seed, round, and task id.
std::uint64_t derive_episode_seed(std::uint64_t master_seed, int round,
                                  const std::string& task_id);

int resolve_max_steps(const EpisodeConfig& cfg, const craft::CraftTask& task);

// Cooperative cancellation flag checked between steps.
std::atomic<bool>& interrupt_flag();

struct EpisodeResult {
  Trajectory trajectory;
  bool aborted = false;
  std::string abort_reason;
};

// One critique-guided episode. When log_path is nonempty the trajectory
// log is flushed per step; an aborted episode leaves the file without its
// final_reward line.
EpisodeResult run_episode(const Runtime& runtime, const craft::CraftTask& task,
                          int round, const std::string& log_path = "");

// One critique-action pair (history, candidates with critiques, refined
// action) harvested from a reward-1 trajectory.
struct RefineEntry {
  std::string task_id;
  std::string env_id;
  int round = 0;
  int step = 0;
  double parent_reward = 0.0;
  std::string history;
  CandidateBuffer buffer;
  AgentAction refined;
};

struct HarvestStats {
  int n_tasks = 0;
  int n_completed = 0;
  int n_aborted = 0;
  int n_correct = 0;
  int n_refine_entries = 0;
  double success_rate = 0.0;
  double avg_final_score = 0.0;

  nlohmann::json to_json() const;
};

struct RoundHarvest {
  int round = 0;
  std::vector<Trajectory> trajectories;  // completed episodes only
  std::vector<Trajectory> d_correct;     // final_reward == 1 exactly
  std::vector<RefineEntry> d_refine;     // critique-mode steps of d_correct
  HarvestStats stats;
};

// One episode per task over a bounded worker pool; results aggregate in
// task order regardless of scheduling.
RoundHarvest run_exploration(const Runtime& runtime, int round,
                             const std::vector<craft::CraftTask>& tasks,
                             const std::string& log_dir = "");

struct IterateOptions {
  int rounds = 3;  // K
  double beta = 0.8;
  std::string general_file;  // required when beta < 1
  std::optional<int> mix_total;
  std::string hook_command;  // {mixed_dataset} and {round} placeholders; empty = no-op
  std::string out_dir;
  std::string run_id = "run";
  bool emit_critiques = false;
};

struct RoundSummary {
  int round = 0;
  HarvestStats stats;
  std::map<std::string, std::size_t> pool_counts;
  std::string manifest_path;
  std::string mixed_path;
  std::string actor_endpoint;  // hook result; empty when unchanged
};

// Exploration / dataset emission / optional trainer hook, K times. The
// hook always retrains from the base actor; only its serving endpoint is
// swapped in. Throws HookFailed (completed rounds stay on disk).
std::vector<RoundSummary> run_iterations(Runtime& runtime,
                                         const std::vector<craft::CraftTask>& tasks,
                                         const IterateOptions& options);

}  // namespace cgi
