#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#include "cgi/rng.hpp"
#include "cgi/trajectory.hpp"

using namespace cgi;

namespace {

Step make_step(int index, const std::string& cmd, double score, bool done) {
  Step s;
  s.index = index;
  AgentAction a;
  a.command = cmd;
  a.thought = "do " + cmd;
  a.raw = "Thought: do " + cmd + "\nAction: " + cmd;
  s.candidates.candidates = {a, a};
  s.refined_action = a;
  s.observation = {"ok after " + cmd, score, done};
  return s;
}

Trajectory make_traj(int steps, bool done_last = true) {
  Trajectory t;
  t.instruction = {"task-1", "craftsim", "Goal: craft widget.", std::nullopt, std::nullopt};
  t.seed = 99;
  t.round = 2;
  for (int i = 0; i < steps; ++i) {
    bool last = i + 1 == steps;
    t = append_step(t, make_step(i, "get thing " + std::to_string(i),
                                 last && done_last ? 1.0 : 0.0, last && done_last));
  }
  return t;
}

Trajectory random_traj(std::uint64_t seed) {
  Rng rng(seed);
  Trajectory t;
  t.instruction.task_id = "fuzz-" + std::to_string(seed);
  t.instruction.env_id = "craftsim";
  t.instruction.text = "Goal: craft stuff.";
  if (rng.below(2) == 0) {
    t.instruction.gold_path = std::vector<std::string>{"get a", "craft b using a"};
    t.instruction.oracle_length = 2;
  }
  t.seed = rng.next();
  t.round = static_cast<int>(rng.below(4));
  int n = 1 + static_cast<int>(rng.below(5));
  for (int i = 0; i < n; ++i) {
    Step s = make_step(i, "cmd" + std::to_string(rng.below(100)), 0.0, i + 1 == n);
    if (rng.below(2) == 0) {
      s.candidates.critiques = {
          make_critique("c", "f", "e", static_cast<Grade>(rng.below(5)), std::nullopt),
          make_critique("c2", "f2", "e2", Grade::Good, std::string("get a"))};
    }
    if (i + 1 == n) s.observation.score = rng.below(2) == 0 ? 1.0 : 0.5;
    t = append_step(t, std::move(s));
  }
  return t;
}

}  // namespace

TEST_CASE("append_step basics") {
  Trajectory empty;
  empty.instruction.task_id = "t";
  Trajectory one = append_step(empty, make_step(0, "go", 0.0, false));
  CHECK(one.steps.size() == 1);

  Trajectory three = make_traj(3, false);
  Trajectory four = append_step(three, make_step(3, "go", 0.0, false));
  CHECK(four.steps.size() == 4);
  CHECK(three.steps.size() == 3);  // input untouched

  Trajectory done = make_traj(2, true);
  CHECK_THROWS_AS(append_step(done, make_step(2, "go", 1.0, true)), AppendAfterDone);
  CHECK_THROWS_AS(append_step(three, make_step(5, "go", 0.0, false)), IndexGap);
  // rewards outside [0,1] never enter a trajectory
  CHECK_THROWS_AS(append_step(three, make_step(3, "go", 1.5, false)), Error);
  CHECK_THROWS_AS(append_step(three, make_step(3, "go", -0.1, false)), Error);
}

TEST_CASE("final_reward is the last score") {
  Trajectory t = make_traj(2);
  CHECK(final_reward(t) == 1.0);

  Trajectory half;
  half.instruction.task_id = "h";
  half = append_step(half, make_step(0, "a", 0.2, false));
  half = append_step(half, make_step(1, "b", 0.7, true));
  CHECK(final_reward(half) == 0.7);
  CHECK(half.final_reward == 0.7);

  Trajectory empty;
  CHECK_THROWS_AS(final_reward(empty), EmptyTrajectory);
}

TEST_CASE("render_history prefixes and bounds") {
  Trajectory t = make_traj(3, false);
  CHECK(render_history(t, 0) == t.instruction.text);
  std::string one = render_history(t, 1);
  CHECK(one.find(t.steps[0].refined_action.raw) != std::string::npos);
  CHECK(one.find("Observation: ok after get thing 0") != std::string::npos);
  for (std::size_t k = 0; k < t.steps.size(); ++k) {
    std::string shorter = render_history(t, k);
    std::string longer = render_history(t, k + 1);
    CHECK(longer.rfind(shorter, 0) == 0);  // prefix property
  }
  CHECK(render_history(t, 2) == render_history(t, 2));  // determinism
  CHECK_THROWS_AS(render_history(t, 4), OutOfRange);
}

TEST_CASE("count_history_steps matches rendered prefix length") {
  Trajectory t = make_traj(4, false);
  for (std::size_t k = 0; k <= 4; ++k) {
    CHECK(count_history_steps(render_history(t, k)) == k);
  }
}

TEST_CASE("json round trip is identity on random trajectories") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    Trajectory t = random_traj(seed);
    Trajectory back = trajectory_from_json(to_json(t));
    CHECK(back == t);
  }
}

TEST_CASE("log writer emits header, steps, and final line") {
  auto path = std::filesystem::temp_directory_path() / "cgi_log_test.jsonl";
  Trajectory t = make_traj(2);
  {
    TrajectoryLogWriter log(path.string(), t.instruction, t.seed, t.round);
    for (const auto& s : t.steps) log.write_step(s);
    log.write_final(t.final_reward);
  }
  LoadedTrajectory loaded = read_trajectory_log(path.string());
  CHECK_FALSE(loaded.aborted);
  CHECK(loaded.trajectory.instruction.task_id == "task-1");
  CHECK(loaded.trajectory.seed == 99);
  CHECK(loaded.trajectory.round == 2);
  CHECK(loaded.trajectory.steps == t.steps);
  CHECK(loaded.trajectory.final_reward == 1.0);
  std::filesystem::remove(path);
}

TEST_CASE("log without final line reads as aborted") {
  auto path = std::filesystem::temp_directory_path() / "cgi_log_aborted.jsonl";
  Trajectory t = make_traj(2, false);
  {
    TrajectoryLogWriter log(path.string(), t.instruction, t.seed, t.round);
    log.write_step(t.steps[0]);
  }
  LoadedTrajectory loaded = read_trajectory_log(path.string());
  CHECK(loaded.aborted);
  CHECK(loaded.trajectory.steps.size() == 1);
  std::filesystem::remove(path);
}

TEST_CASE("trajectory_log_bytes matches the writer output") {
  auto path = std::filesystem::temp_directory_path() / "cgi_log_bytes.jsonl";
  Trajectory t = make_traj(3);
  {
    TrajectoryLogWriter log(path.string(), t.instruction, t.seed, t.round);
    for (const auto& s : t.steps) log.write_step(s);
    log.write_final(t.final_reward);
  }
  std::ifstream in(path, std::ios::binary);
  std::string file_bytes((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  CHECK(file_bytes == trajectory_log_bytes(t));
  std::filesystem::remove(path);
}
