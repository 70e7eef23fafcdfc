#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <thread>

#include "doctest.h"

#include "cgi/bridge.hpp"
#include "cgi/forge.hpp"
#include "cgi/orchestrator.hpp"

using namespace cgi;

namespace {

namespace fs = std::filesystem;

EpisodeConfig scripted_config(double fidelity, CriticKind critic, bool critique_on,
                              std::uint64_t seed) {
  EpisodeConfig cfg;
  cfg.actor.backend = ActorConfig::Backend::Scripted;
  cfg.actor.fidelity = fidelity;
  cfg.actor.m_candidates = 5;
  cfg.critic = critic;
  cfg.critique_per_step = critique_on;
  cfg.master_seed = seed;
  cfg.workers = 2;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("perfect actor follows the gold path without a critic") {
  auto tasks = craft::generate_tasks({2, 2, 4, 3});
  Runtime runtime = make_local_runtime(scripted_config(1.0, CriticKind::None, false, 1));
  for (const auto& task : tasks) {
    EpisodeResult result = run_episode(runtime, task, 0);
    REQUIRE_FALSE(result.aborted);
    CHECK(result.trajectory.final_reward == 1.0);
    CHECK(static_cast<int>(result.trajectory.steps.size()) ==
          *task.instruction.oracle_length);
  }
}

TEST_CASE("oracle critic rescues a zero-fidelity actor") {
  auto tasks = craft::generate_tasks({2, 2, 3, 4});
  Runtime runtime = make_local_runtime(scripted_config(0.0, CriticKind::Oracle, true, 2));
  for (const auto& task : tasks) {
    EpisodeResult result = run_episode(runtime, task, 0);
    REQUIRE_FALSE(result.aborted);
    CHECK(result.trajectory.final_reward == 1.0);
    CHECK(static_cast<int>(result.trajectory.steps.size()) ==
          *task.instruction.oracle_length);
    // every refined action is the gold next action
    for (std::size_t t = 0; t < result.trajectory.steps.size(); ++t) {
      CHECK(craft::commands_equal(result.trajectory.steps[t].refined_action.command,
                                  task.instruction.gold_path->at(t)));
    }
  }
}

TEST_CASE("zero-fidelity actor without critiques fails the pinned depth-2 task") {
  auto tasks = craft::generate_tasks({2, 1, 1, 5});
  EpisodeConfig cfg = scripted_config(0.0, CriticKind::None, false, 6);
  cfg.max_steps = 10;
  Runtime runtime = make_local_runtime(cfg);
  EpisodeResult result = run_episode(runtime, tasks[0], 0);
  REQUIRE_FALSE(result.aborted);
  CHECK(result.trajectory.final_reward == 0.0);  // pinned under this seed
  CHECK(result.trajectory.steps.size() == 10);
}

TEST_CASE("critique off means candidate 0 executes at every step") {
  auto tasks = craft::generate_tasks({2, 2, 2, 7});
  Runtime runtime = make_local_runtime(scripted_config(0.4, CriticKind::None, false, 8));
  for (const auto& task : tasks) {
    EpisodeResult result = run_episode(runtime, task, 0);
    REQUIRE_FALSE(result.aborted);
    for (const auto& step : result.trajectory.steps) {
      CHECK(step.refined_action == step.candidates.candidates.at(0));
      CHECK(step.candidates.critiques.empty());
    }
  }
}

TEST_CASE("episode seeds derive from master seed, round, and task id") {
  CHECK(derive_episode_seed(1, 1, "a") != derive_episode_seed(1, 2, "a"));
  CHECK(derive_episode_seed(1, 1, "a") != derive_episode_seed(1, 1, "b"));
  CHECK(derive_episode_seed(1, 1, "a") != derive_episode_seed(2, 1, "a"));
  CHECK(derive_episode_seed(1, 1, "a") == derive_episode_seed(1, 1, "a"));
}

TEST_CASE("fixed seeds reproduce byte-identical logs regardless of workers") {
  auto tasks = craft::generate_tasks({2, 2, 6, 9});
  TempDir dir_a("cgi_orch_logs_a");
  TempDir dir_b("cgi_orch_logs_b");

  EpisodeConfig cfg = scripted_config(0.5, CriticKind::Oracle, true, 10);
  cfg.workers = 1;
  Runtime serial = make_local_runtime(cfg);
  cfg.workers = 4;
  Runtime parallel = make_local_runtime(cfg);

  run_exploration(serial, 1, tasks, dir_a.str());
  run_exploration(parallel, 1, tasks, dir_b.str());
  for (const auto& task : tasks) {
    std::string name = task.instruction.task_id + ".jsonl";
    std::string a = file_bytes(fs::path(dir_a.str()) / name);
    std::string b = file_bytes(fs::path(dir_b.str()) / name);
    CHECK(a == b);
    CHECK_FALSE(a.empty());
  }
}

TEST_CASE("harvest filters pools by exact reward and counts refine entries") {
  auto tasks = craft::generate_tasks({2, 2, 8, 12});
  // fidelity 0.55, critique off: some succeed, some fail
  Runtime runtime = make_local_runtime(scripted_config(0.55, CriticKind::None, false, 13));
  RoundHarvest harvest = run_exploration(runtime, 1, tasks);
  CHECK(harvest.stats.n_tasks == 8);
  CHECK(harvest.stats.n_completed == 8);
  CHECK(harvest.stats.n_correct < 8);  // under this seed some episodes fail
  CHECK(harvest.stats.n_correct > 0);
  for (const auto& traj : harvest.d_correct) CHECK(traj.final_reward == 1.0);
  CHECK(harvest.d_refine.empty());  // no critiques were produced

  // with the oracle critic every episode succeeds and every step harvests
  Runtime guided = make_local_runtime(scripted_config(0.55, CriticKind::Oracle, true, 13));
  RoundHarvest guided_harvest = run_exploration(guided, 1, tasks);
  CHECK(guided_harvest.stats.n_correct == 8);
  std::size_t steps = 0;
  for (const auto& traj : guided_harvest.d_correct) steps += traj.steps.size();
  CHECK(guided_harvest.d_refine.size() == steps);
  for (const auto& entry : guided_harvest.d_refine) {
    CHECK(entry.parent_reward == 1.0);
    CHECK(entry.buffer.critiques.size() == entry.buffer.candidates.size());
  }
}

TEST_CASE("aborting env factories mark episodes aborted, not failed") {
  auto tasks = craft::generate_tasks({1, 1, 3, 14});
  Runtime runtime = make_local_runtime(scripted_config(1.0, CriticKind::None, false, 15));
  int calls = 0;
  runtime.env_factory = [&calls](const craft::CraftTask& task, int max_steps)
      -> std::unique_ptr<TextEnv> {
    if (++calls == 2) throw BackendUnavailable("env exploded");
    craft::CraftConfig cfg;
    cfg.max_steps = max_steps;
    return std::make_unique<LocalCraftEnv>(task, cfg);
  };
  EpisodeConfig cfg = runtime.cfg;
  cfg.workers = 1;
  runtime.cfg = cfg;
  RoundHarvest harvest = run_exploration(runtime, 1, tasks);
  CHECK(harvest.stats.n_aborted == 1);
  CHECK(harvest.stats.n_completed == 2);
  CHECK(harvest.stats.n_correct == 2);
  CHECK(harvest.trajectories.size() == 2);
}

TEST_CASE("aborted episodes leave logs without a final line") {
  auto tasks = craft::generate_tasks({1, 1, 1, 16});
  TempDir dir("cgi_orch_abort_log");
  Runtime runtime = make_local_runtime(scripted_config(1.0, CriticKind::None, false, 17));
  // an env that dies on the first step
  runtime.env_factory = [](const craft::CraftTask& task, int) -> std::unique_ptr<TextEnv> {
    class Dying : public TextEnv {
     public:
      explicit Dying(craft::CraftTask t) : env_(std::move(t)) {}
      Observation reset(const std::string&, std::uint64_t seed) override {
        return env_.reset(seed);
      }
      Observation step(const std::string&, const std::string&) override {
        throw BackendUnavailable("boom");
      }

     private:
      craft::CraftEnv env_;
    };
    return std::make_unique<Dying>(task);
  };
  RoundHarvest harvest = run_exploration(runtime, 1, tasks, dir.str());
  CHECK(harvest.stats.n_aborted == 1);
  auto log = (fs::path(dir.str()) / (tasks[0].instruction.task_id + ".jsonl")).string();
  LoadedTrajectory loaded = read_trajectory_log(log);
  CHECK(loaded.aborted);
}

TEST_CASE("run_iterations emits K rounds of datasets and manifests") {
  auto tasks = craft::generate_tasks({2, 2, 3, 18});
  TempDir dir("cgi_orch_iterate");

  Runtime runtime = make_local_runtime(scripted_config(0.6, CriticKind::Oracle, true, 19));
  IterateOptions options;
  options.rounds = 3;
  options.beta = 1.0;  // no general corpus needed
  options.out_dir = dir.str();
  options.run_id = "itest";

  auto summaries = run_iterations(runtime, tasks, options);
  REQUIRE(summaries.size() == 3);
  for (int k = 1; k <= 3; ++k) {
    fs::path data = fs::path(dir.str()) / ("round_" + std::to_string(k)) / "datasets";
    for (const char* name :
         {"expert.json", "correct.json", "refine.json", "train.json"}) {
      CHECK(fs::exists(data / name));
    }
    CHECK(fs::exists(data / ("mixed_round" + std::to_string(k) + ".json")));
    CHECK(fs::exists(data / ("manifest_round" + std::to_string(k) + ".json")));
    CHECK(fs::exists(fs::path(dir.str()) / ("round_" + std::to_string(k)) /
                     "harvest_stats.json"));
  }
  // K=1 equals a single exploration round
  TempDir single("cgi_orch_iterate_single");
  options.rounds = 1;
  options.out_dir = single.str();
  Runtime fresh = make_local_runtime(scripted_config(0.6, CriticKind::Oracle, true, 19));
  auto one = run_iterations(fresh, tasks, options);
  CHECK(one.size() == 1);
  CHECK(one[0].stats.n_correct == 3);
}

TEST_CASE("train set equals dedup(expert union cumulative correct)") {
  auto tasks = craft::generate_tasks({2, 2, 4, 20});
  TempDir dir("cgi_orch_setalg");
  Runtime runtime = make_local_runtime(scripted_config(0.5, CriticKind::Oracle, true, 21));
  IterateOptions options;
  options.rounds = 3;
  options.beta = 1.0;
  options.out_dir = dir.str();
  options.run_id = "algebra";
  run_iterations(runtime, tasks, options);

  auto expert = forge::read_records(
      (fs::path(dir.str()) / "round_1" / "datasets" / "expert.json").string());
  std::vector<forge::DatasetRecord> correct_cum;
  for (int k = 1; k <= 3; ++k) {
    fs::path data = fs::path(dir.str()) / ("round_" + std::to_string(k)) / "datasets";
    auto correct_k = forge::read_records((data / "correct.json").string());
    correct_cum.insert(correct_cum.end(), correct_k.begin(), correct_k.end());
    auto expected = forge::union_train(expert, correct_cum);
    auto actual = forge::read_records((data / "train.json").string());
    REQUIRE(actual.size() == expected.size());
    std::multiset<std::string> expected_keys, actual_keys;
    for (const auto& r : expected) expected_keys.insert(forge::conversation_bytes(r));
    for (const auto& r : actual) actual_keys.insert(forge::conversation_bytes(r));
    CHECK(expected_keys == actual_keys);
  }
}

TEST_CASE("trainer hook failure stops later rounds but keeps earlier output") {
  auto tasks = craft::generate_tasks({1, 1, 2, 22});
  TempDir dir("cgi_orch_hookfail");
  Runtime runtime = make_local_runtime(scripted_config(1.0, CriticKind::Oracle, true, 23));
  IterateOptions options;
  options.rounds = 3;
  options.beta = 1.0;
  options.out_dir = dir.str();
  options.hook_command = "exit 3";
  CHECK_THROWS_AS(run_iterations(runtime, tasks, options), HookFailed);
  CHECK(fs::exists(fs::path(dir.str()) / "round_1" / "datasets" / "train.json"));
  CHECK_FALSE(fs::exists(fs::path(dir.str()) / "round_2"));
}

TEST_CASE("trainer hook endpoint is captured and applied") {
  auto tasks = craft::generate_tasks({1, 1, 1, 24});
  TempDir dir("cgi_orch_hookok");
  Runtime runtime = make_local_runtime(scripted_config(1.0, CriticKind::Oracle, true, 25));
  std::vector<std::string> applied;
  runtime.apply_actor_endpoint = [&applied](const std::string& endpoint) {
    applied.push_back(endpoint);
  };
  IterateOptions options;
  options.rounds = 2;
  options.beta = 1.0;
  options.out_dir = dir.str();
  options.hook_command = "echo training on {mixed_dataset}; echo http://actor:800{round}";
  auto summaries = run_iterations(runtime, tasks, options);
  REQUIRE(summaries.size() == 2);
  CHECK(summaries[0].actor_endpoint == "http://actor:8001");
  CHECK(summaries[1].actor_endpoint == "http://actor:8002");
  CHECK(applied == std::vector<std::string>{"http://actor:8001", "http://actor:8002"});
}

TEST_CASE("episodes run through the bridge match local episodes byte for byte") {
  auto tasks = craft::generate_tasks({2, 2, 3, 26});
  TempDir local_dir("cgi_orch_bridge_local");
  TempDir bridge_dir("cgi_orch_bridge_remote");

  EpisodeConfig cfg = scripted_config(0.5, CriticKind::Oracle, true, 27);
  cfg.workers = 1;
  Runtime local = make_local_runtime(cfg);
  run_exploration(local, 1, tasks, local_dir.str());

  Runtime bridged = make_local_runtime(cfg);
  bridged.env_factory = [&tasks](const craft::CraftTask&,
                                 int max_steps) -> std::unique_ptr<TextEnv> {
    auto [client_side, server_side] = bridge::make_transport_pair();
    std::thread server([t = std::move(server_side), tasks, max_steps]() mutable {
      craft::CraftConfig cfg_env;
      cfg_env.max_steps = max_steps;
      bridge::serve_env(*t, tasks, cfg_env);
    });
    server.detach();
    return std::make_unique<bridge::BridgeEnv>(
        std::make_unique<bridge::BridgeSession>(std::move(client_side)));
  };
  run_exploration(bridged, 1, tasks, bridge_dir.str());

  for (const auto& task : tasks) {
    std::string name = task.instruction.task_id + ".jsonl";
    CHECK(file_bytes(fs::path(local_dir.str()) / name) ==
          file_bytes(fs::path(bridge_dir.str()) / name));
  }
}
