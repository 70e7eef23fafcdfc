#include "cgi/orchestrator.hpp"

#include <filesystem>
#include <thread>

namespace cgi {

std::uint64_t derive_episode_seed(std::uint64_t master_seed, int round,
                                  const std::string& task_id) {
  return hash64(hash64(master_seed, static_cast<std::uint64_t>(round)), task_id);
}

int resolve_max_steps(const EpisodeConfig& cfg, const craft::CraftTask& task) {
  if (cfg.max_steps > 0) return cfg.max_steps;
  return craft::default_max_steps(task.instruction.oracle_length.value_or(0));
}

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

Runtime make_local_runtime(EpisodeConfig cfg) {
  Runtime runtime;
  runtime.cfg = cfg;
  runtime.env_factory = [](const craft::CraftTask& task, int max_steps) {
    craft::CraftConfig env_cfg;
    env_cfg.max_steps = max_steps;
    return std::make_unique<LocalCraftEnv>(task, env_cfg);
  };
  ActorConfig actor_cfg = cfg.actor;
  runtime.actor_factory = [actor_cfg](const craft::CraftTask& task, std::uint64_t seed) {
    return std::make_unique<ScriptedActor>(actor_cfg, task, seed);
  };
  double flip = cfg.critic_flip_prob;
  CriticKind kind = cfg.critic;
  runtime.critic_factory = [flip, kind](const craft::CraftTask& task,
                                        std::uint64_t seed) -> std::unique_ptr<Critic> {
    if (kind == CriticKind::None) return nullptr;
    std::unique_ptr<Critic> critic = std::make_unique<OracleCritic>(task.graph);
    if (flip > 0.0) {
      critic = std::make_unique<DegradedCritic>(std::move(critic), flip, seed);
    }
    return critic;
  };
  return runtime;
}

EpisodeResult run_episode(const Runtime& runtime, const craft::CraftTask& task,
                          int round, const std::string& log_path) {
  const EpisodeConfig& cfg = runtime.cfg;
  const std::string& task_id = task.instruction.task_id;
  const std::string& env_id = task.instruction.env_id;
  const std::uint64_t seed = derive_episode_seed(cfg.master_seed, round, task_id);
  const int max_steps = resolve_max_steps(cfg, task);

  EpisodeResult result;
  result.trajectory.instruction = task.instruction;
  result.trajectory.seed = seed;
  result.trajectory.round = round;

  std::unique_ptr<TrajectoryLogWriter> log;
  try {
    std::unique_ptr<TextEnv> env = runtime.env_factory(task, max_steps);
    std::unique_ptr<Actor> actor = runtime.actor_factory(task, seed);
    std::unique_ptr<Critic> critic;
    if (cfg.critique_per_step && cfg.critic != CriticKind::None) {
      critic = runtime.critic_factory(task, seed);
    }
    const bool give_gold =
        cfg.critic == CriticKind::Oracle || (cfg.critic == CriticKind::Remote && cfg.expert_prompts);

    env->reset(task_id, seed);
    if (!log_path.empty()) {
      log = std::make_unique<TrajectoryLogWriter>(log_path, task.instruction, seed, round);
    }

    for (int t = 0; t < max_steps; ++t) {
      if (interrupt_flag().load()) {
        result.aborted = true;
        result.abort_reason = "interrupted";
        return result;
      }
      ChatTurns prompt = render_actor_prompt(runtime.prompts, env_id, task.instruction,
                                             result.trajectory.steps);
      CandidateBuffer buffer = actor->sample_candidates(prompt);

      AgentAction refined;
      if (critic) {
        const std::string history = render_history(result.trajectory, result.trajectory.steps.size());
        for (const auto& candidate : buffer.candidates) {
          CritiqueRequest req;
          req.env_id = env_id;
          req.history = history;
          req.candidate = candidate;
          req.available_actions = runtime.prompts.available_actions(env_id);
          if (give_gold) req.gold_path = task.instruction.gold_path;
          buffer.critiques.push_back(critic->critique(req));
        }
        refined = actor->refine_action(prompt, buffer);
      } else {
        refined = buffer.candidates.at(0);
      }

      Observation obs = env->step(task_id, refined.command);
      Step step;
      step.index = t;
      step.candidates = std::move(buffer);
      step.refined_action = std::move(refined);
      step.observation = obs;
      result.trajectory = append_step(result.trajectory, std::move(step));
      if (log) log->write_step(result.trajectory.steps.back());
      if (obs.done) break;
    }

    if (log) log->write_final(result.trajectory.final_reward);
    return result;
  } catch (const std::exception& e) {
    result.aborted = true;
    result.abort_reason = e.what();
    return result;
  }
}

nlohmann::json HarvestStats::to_json() const {
  return nlohmann::json{{"n_tasks", n_tasks},
                        {"n_completed", n_completed},
                        {"n_aborted", n_aborted},
                        {"n_correct", n_correct},
                        {"n_refine_entries", n_refine_entries},
                        {"success_rate", success_rate},
                        {"avg_final_score", avg_final_score}};
}

RoundHarvest run_exploration(const Runtime& runtime, int round,
                             const std::vector<craft::CraftTask>& tasks,
                             const std::string& log_dir) {
  if (!log_dir.empty()) std::filesystem::create_directories(log_dir);

  std::vector<EpisodeResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  const int workers =
      std::max(1, std::min<int>(runtime.cfg.workers, static_cast<int>(tasks.size())));

  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      std::string log_path;
      if (!log_dir.empty()) {
        log_path = (std::filesystem::path(log_dir) /
                    (tasks[i].instruction.task_id + ".jsonl"))
                       .string();
      }
      results[i] = run_episode(runtime, tasks[i], round, log_path);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  RoundHarvest harvest;
  harvest.round = round;
  double score_sum = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    EpisodeResult& r = results[i];
    if (r.aborted) {
      harvest.stats.n_aborted += 1;
      continue;
    }
    score_sum += r.trajectory.final_reward;
    if (r.trajectory.final_reward == 1.0) {
      harvest.stats.n_correct += 1;
      harvest.d_correct.push_back(r.trajectory);
      for (std::size_t t = 0; t < r.trajectory.steps.size(); ++t) {
        const Step& step = r.trajectory.steps[t];
        if (step.candidates.critiques.empty()) continue;
        RefineEntry entry;
        entry.task_id = r.trajectory.instruction.task_id;
        entry.env_id = r.trajectory.instruction.env_id;
        entry.round = round;
        entry.step = static_cast<int>(t);
        entry.parent_reward = r.trajectory.final_reward;
        entry.history = render_history(r.trajectory, t);
        entry.buffer = step.candidates;
        entry.refined = step.refined_action;
        harvest.d_refine.push_back(std::move(entry));
      }
    }
    harvest.trajectories.push_back(std::move(r.trajectory));
  }
  harvest.stats.n_tasks = static_cast<int>(tasks.size());
  harvest.stats.n_completed = static_cast<int>(harvest.trajectories.size());
  harvest.stats.n_refine_entries = static_cast<int>(harvest.d_refine.size());
  if (harvest.stats.n_completed > 0) {
    harvest.stats.success_rate =
        static_cast<double>(harvest.stats.n_correct) / harvest.stats.n_completed;
    harvest.stats.avg_final_score = score_sum / harvest.stats.n_completed;
  }
  return harvest;
}

}  // namespace cgi
