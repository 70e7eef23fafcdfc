#include <map>
#include <vector>

#include "doctest.h"

#include "cgi/metrics.hpp"
#include "cgi/orchestrator.hpp"

using namespace cgi;
using namespace cgi::metrics;

namespace {

Trajectory traj_with_rewards(const std::string& id, double reward, int steps = 1) {
  Trajectory t;
  t.instruction.task_id = id;
  t.instruction.env_id = "craftsim";
  for (int i = 0; i < steps; ++i) {
    Step s;
    s.index = i;
    AgentAction a;
    a.command = "get log";
    a.raw = "Action: get log";
    s.candidates.candidates = {a};
    s.refined_action = a;
    bool last = i + 1 == steps;
    s.observation = {"obs", last ? reward : 0.0, last};
    t = append_step(t, std::move(s));
  }
  return t;
}

// one trajectory of `len` steps, revised exactly at the given step indices
Trajectory traj_revised_at(const std::string& id, int len, std::vector<int> revised) {
  Trajectory t;
  t.instruction.task_id = id;
  t.instruction.env_id = "craftsim";
  for (int i = 0; i < len; ++i) {
    Step s;
    s.index = i;
    AgentAction base;
    base.command = "get log";
    base.raw = "Action: get log";
    AgentAction other;
    other.command = "get stone";
    other.raw = "Action: get stone";
    s.candidates.candidates = {base, other};
    bool is_revised = std::find(revised.begin(), revised.end(), i) != revised.end();
    s.refined_action = is_revised ? other : base;
    s.observation = {"obs", 0.0, i + 1 == len};
    t = append_step(t, std::move(s));
  }
  return t;
}

}  // namespace

TEST_CASE("average final score") {
  std::vector<Trajectory> trajs = {traj_with_rewards("a", 0.5), traj_with_rewards("b", 1.0),
                                   traj_with_rewards("c", 0.0), traj_with_rewards("d", 0.5)};
  CHECK(avg_final_score(trajs) == doctest::Approx(0.5));
  CHECK(avg_final_score({traj_with_rewards("a", 1.0), traj_with_rewards("b", 1.0)}) == 1.0);
  CHECK(avg_final_score({traj_with_rewards("a", 0.3)}) == doctest::Approx(0.3));
  CHECK_THROWS_AS(avg_final_score({}), NoEpisodes);
}

TEST_CASE("success rate counts exact ones only") {
  std::vector<Trajectory> trajs = {traj_with_rewards("a", 1.0), traj_with_rewards("b", 0.0),
                                   traj_with_rewards("c", 1.0), traj_with_rewards("d", 1.0)};
  CHECK(success_rate(trajs) == doctest::Approx(0.75));
  CHECK(success_rate({traj_with_rewards("a", 0.99)}) == 0.0);
  CHECK_THROWS_AS(success_rate({}), NoEpisodes);
}

TEST_CASE("stage mapping partitions steps") {
  // length 5: one step per stage
  for (int t = 0; t < 5; ++t) CHECK(stage_of(t, 5) == t + 1);
  // length 10: two steps per stage
  CHECK(stage_of(0, 10) == 1);
  CHECK(stage_of(1, 10) == 1);
  CHECK(stage_of(2, 10) == 2);
  CHECK(stage_of(9, 10) == 5);
  // short trajectories skip stages but stay in range
  CHECK(stage_of(0, 2) == 3);
  CHECK(stage_of(1, 2) == 5);
  CHECK(stage_of(0, 1) == 5);
  // partition property: stage populations sum to the trajectory length
  for (int len = 1; len <= 40; ++len) {
    int total = 0;
    std::map<int, int> by_stage;
    for (int t = 0; t < len; ++t) {
      int s = stage_of(t, len);
      CHECK(s >= 1);
      CHECK(s <= 5);
      by_stage[s] += 1;
      ++total;
    }
    CHECK(total == len);
  }
}

TEST_CASE("revision ratio per stage, exact mapping") {
  auto stages = revision_ratio({traj_revised_at("a", 5, {0, 2})});
  CHECK(stages[0].ratio() == 1.0);
  CHECK(stages[1].ratio() == 0.0);
  CHECK(stages[2].ratio() == 1.0);
  CHECK(stages[3].ratio() == 0.0);
  CHECK(stages[4].ratio() == 0.0);

  auto none = revision_ratio({traj_revised_at("b", 6, {})});
  for (const auto& s : none) {
    if (s.total > 0) CHECK(s.ratio() == 0.0);
  }

  Trajectory no_candidates = traj_with_rewards("c", 1.0);
  no_candidates.steps[0].candidates.candidates.clear();
  CHECK_THROWS_AS(revision_ratio({no_candidates}), MissingCandidates);
}

TEST_CASE("stage totals sum to whole-run step counts") {
  std::vector<Trajectory> trajs = {traj_revised_at("a", 7, {0, 3}),
                                   traj_revised_at("b", 3, {1}),
                                   traj_revised_at("c", 11, {2, 5, 9})};
  auto stages = revision_ratio(trajs);
  int total = 0, revised = 0;
  for (const auto& s : stages) {
    total += s.total;
    revised += s.revised;
  }
  CHECK(total == 7 + 3 + 11);
  CHECK(revised == 2 + 1 + 3);
}

TEST_CASE("difficulty terciles follow oracle lengths with ties to the lower bucket") {
  std::map<std::string, int> lengths = {{"a", 2}, {"b", 2}, {"c", 5},
                                        {"d", 5}, {"e", 9}, {"f", 9}};
  std::vector<Trajectory> trajs;
  for (const auto& [id, len] : lengths) trajs.push_back(traj_with_rewards(id, 1.0));
  auto buckets = difficulty_buckets(lengths, trajs);
  CHECK(buckets[0].n_tasks == 2);
  CHECK(buckets[1].n_tasks == 2);
  CHECK(buckets[2].n_tasks == 2);
  CHECK(buckets[0].avg_score == 1.0);

  std::map<std::string, int> equal = {{"a", 4}, {"b", 4}, {"c", 4}};
  auto all_easy = difficulty_buckets(equal, {traj_with_rewards("a", 0.5)});
  CHECK(all_easy[0].n_tasks == 3);
  CHECK(all_easy[1].n_tasks == 0);
  CHECK(all_easy[2].n_tasks == 0);
  CHECK(all_easy[0].avg_score == 0.5);

  CHECK_THROWS_AS(difficulty_buckets({}, trajs), MissingOracleLength);
  CHECK_THROWS_AS(difficulty_buckets({{"other", 3}}, trajs), MissingOracleLength);
}

TEST_CASE("cumulative series mirrors observation scores") {
  Trajectory t = traj_with_rewards("a", 1.0, 6);
  auto series = cumulative_series(t);
  REQUIRE(series.size() == 6);
  for (int i = 0; i < 5; ++i) CHECK(series[static_cast<std::size_t>(i)].second == 0.0);
  CHECK(series[5].second == 1.0);
  // nondecreasing
  for (std::size_t i = 1; i < series.size(); ++i) {
    CHECK(series[i].second >= series[i - 1].second);
  }
  Trajectory failed = traj_with_rewards("b", 0.0, 4);
  for (const auto& [step, score] : cumulative_series(failed)) CHECK(score == 0.0);
  Trajectory empty;
  CHECK_THROWS_AS(cumulative_series(empty), EmptyTrajectory);
}

TEST_CASE("binary rewards make avg score equal success rate") {
  auto tasks = craft::generate_tasks({2, 2, 6, 41});
  EpisodeConfig cfg;
  cfg.actor.fidelity = 0.6;
  cfg.critic = CriticKind::None;
  cfg.critique_per_step = false;
  cfg.master_seed = 42;
  Runtime runtime = make_local_runtime(cfg);
  RoundHarvest harvest = run_exploration(runtime, 0, tasks);
  REQUIRE_FALSE(harvest.trajectories.empty());
  CHECK(avg_final_score(harvest.trajectories) == success_rate(harvest.trajectories));
}

TEST_CASE("report json is deterministic") {
  std::vector<Trajectory> trajs = {traj_revised_at("a", 5, {0}), traj_revised_at("b", 4, {2}),
                                   traj_with_rewards("c", 1.0, 3)};
  std::map<std::string, int> lengths = {{"a", 5}, {"b", 4}, {"c", 3}};
  MetricsReport r1 = build_report(trajs, {{"craftsim", 1}}, 0, 1, lengths);
  MetricsReport r2 = build_report(trajs, {{"craftsim", 1}}, 0, 1, lengths);
  CHECK(r1.to_json().dump() == r2.to_json().dump());
  CHECK(r1.envs.at("craftsim").aborted == 1);
  CHECK(r1.envs.at("craftsim").has_buckets);
}
