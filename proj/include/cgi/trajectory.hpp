#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cgi/critique.hpp"
#include "cgi/errors.hpp"

namespace cgi {

struct Instruction {
  std::string task_id;
  std::string env_id;
  std::string text;
  std::optional<std::vector<std::string>> gold_path;
  std::optional<int> oracle_length;

  bool operator==(const Instruction&) const = default;
};

// One model action: the parsed command plus the verbatim output it came
// from, so dataset emission can reproduce assistant turns exactly.
struct AgentAction {
  std::string thought;
  std::string command;
  std::string raw;

  bool operator==(const AgentAction&) const = default;
};

struct Observation {
  std::string text;
  double score = 0.0;  // cumulative task score in [0,1]
  bool done = false;

  bool operator==(const Observation&) const = default;
};

// Candidate actions in sampling order with their (possibly empty) parallel
// critique list. Candidate 0 is the no-critique baseline.
struct CandidateBuffer {
  std::vector<AgentAction> candidates;
  std::vector<Critique> critiques;

  bool operator==(const CandidateBuffer&) const = default;
};

struct Step {
  int index = 0;
  CandidateBuffer candidates;
  AgentAction refined_action;
  Observation observation;

  bool operator==(const Step&) const = default;
};

struct Trajectory {
  Instruction instruction;
  std::vector<Step> steps;
  double final_reward = 0.0;
  std::uint64_t seed = 0;
  int round = 0;

  bool terminated() const {
    return !steps.empty() && steps.back().observation.done;
  }
  bool operator==(const Trajectory&) const = default;
};

// Returns a copy of traj with the step appended. Throws AppendAfterDone if
// the trajectory already ended, IndexGap if step.index != current length.
Trajectory append_step(const Trajectory& traj, Step step);

// Deterministic textual rendering of the instruction followed by the first
// `upto` steps: raw refined actions alternating with observation texts.
// render_history(t, k) is a byte prefix of render_history(t, k+1).
std::string render_history(const Trajectory& traj, std::size_t upto);

double final_reward(const Trajectory& traj);

// Number of "Observation: " lines, i.e. the executed-step count of a
// rendered history.
std::size_t count_history_steps(const std::string& rendered);

// JSON (de)serialization for every core type; round trips exactly.
nlohmann::json to_json(const AgentAction& a);
nlohmann::json to_json(const Observation& o);
nlohmann::json to_json(const Critique& c);
nlohmann::json to_json(const Instruction& ins);
nlohmann::json to_json(const Step& s);
nlohmann::json to_json(const Trajectory& t);

AgentAction action_from_json(const nlohmann::json& j);
Observation observation_from_json(const nlohmann::json& j);
Critique critique_from_json(const nlohmann::json& j);
Instruction instruction_from_json(const nlohmann::json& j);
Step step_from_json(const nlohmann::json& j);
Trajectory trajectory_from_json(const nlohmann::json& j);

// Append-only newline-delimited JSON episode log.
// Line 1: {"task_id","env_id","seed","round"}; one step object per line;
// final line {"final_reward"}. A file without the final line was aborted.
class TrajectoryLogWriter {
 public:
  TrajectoryLogWriter(const std::string& path, const Instruction& ins,
                      std::uint64_t seed, int round);
  void write_step(const Step& step);           // flushes
  void write_final(double reward);             // flushes and closes
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  void append_line(const std::string& line);
};

struct LoadedTrajectory {
  Trajectory trajectory;
  bool aborted = false;  // no final_reward line
};

// Throws cgi::Error on malformed content.
LoadedTrajectory read_trajectory_log(const std::string& path);

// Serializes a trajectory to its log representation in memory (same bytes a
// writer would produce for a completed episode).
std::string trajectory_log_bytes(const Trajectory& t);

}  // namespace cgi
