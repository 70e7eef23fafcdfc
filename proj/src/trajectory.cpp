#include "cgi/trajectory.hpp"

#include <fstream>
#include <sstream>
#include <utility>

namespace cgi {
namespace {

using nlohmann::json;

Grade grade_from_string(const std::string& s) {
  if (s == "Excellent") return Grade::Excellent;
  if (s == "Good") return Grade::Good;
  if (s == "Neutral") return Grade::Neutral;
  if (s == "Poor") return Grade::Poor;
  if (s == "Very Poor") return Grade::VeryPoor;
  throw Error("unknown grade label: " + s);
}

}  // namespace

Trajectory append_step(const Trajectory& traj, Step step) {
  if (traj.terminated()) {
    throw AppendAfterDone("trajectory for task " + traj.instruction.task_id +
                          " already ended");
  }
  if (step.index != static_cast<int>(traj.steps.size())) {
    throw IndexGap("expected step index " + std::to_string(traj.steps.size()) +
                   ", got " + std::to_string(step.index));
  }
  if (step.observation.score < 0.0 || step.observation.score > 1.0) {
    throw Error("observation score outside [0,1]: " +
                std::to_string(step.observation.score));
  }
  Trajectory out = traj;
  out.steps.push_back(std::move(step));
  out.final_reward = out.steps.back().observation.score;
  return out;
}

std::string render_history(const Trajectory& traj, std::size_t upto) {
  if (upto > traj.steps.size()) {
    throw OutOfRange("history index " + std::to_string(upto) + " exceeds length " +
                     std::to_string(traj.steps.size()));
  }
  std::string out = traj.instruction.text;
  for (std::size_t i = 0; i < upto; ++i) {
    out += "\n\n";
    out += traj.steps[i].refined_action.raw;
    out += "\nObservation: ";
    out += traj.steps[i].observation.text;
  }
  return out;
}

double final_reward(const Trajectory& traj) {
  if (traj.steps.empty()) throw EmptyTrajectory("trajectory has no steps");
  return traj.steps.back().observation.score;
}

std::size_t count_history_steps(const std::string& rendered) {
  std::size_t n = 0;
  std::size_t pos = 0;
  const std::string marker = "\nObservation: ";
  while ((pos = rendered.find(marker, pos)) != std::string::npos) {
    ++n;
    pos += marker.size();
  }
  return n;
}

json to_json(const AgentAction& a) {
  return json{{"thought", a.thought}, {"command", a.command}, {"raw", a.raw}};
}

json to_json(const Observation& o) {
  return json{{"text", o.text}, {"score", o.score}, {"done", o.done}};
}

json to_json(const Critique& c) {
  json j{{"contribution", c.contribution},
         {"feasibility", c.feasibility},
         {"efficiency", c.efficiency},
         {"grade", to_string(c.grade)},
         {"raw", c.raw}};
  j["suggested_revision"] =
      c.suggested_revision ? json(*c.suggested_revision) : json(nullptr);
  return j;
}

json to_json(const Instruction& ins) {
  json j{{"task_id", ins.task_id}, {"env_id", ins.env_id}, {"text", ins.text}};
  j["gold_path"] = ins.gold_path ? json(*ins.gold_path) : json(nullptr);
  j["oracle_length"] = ins.oracle_length ? json(*ins.oracle_length) : json(nullptr);
  return j;
}

json to_json(const Step& s) {
  json candidates = json::array();
  for (const auto& c : s.candidates.candidates) candidates.push_back(to_json(c));
  json critiques = json::array();
  for (const auto& c : s.candidates.critiques) critiques.push_back(to_json(c));
  return json{{"t", s.index},
              {"candidates", candidates},
              {"critiques", critiques},
              {"action", to_json(s.refined_action)},
              {"observation", s.observation.text},
              {"score", s.observation.score},
              {"done", s.observation.done}};
}

json to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) steps.push_back(to_json(s));
  return json{{"instruction", to_json(t.instruction)},
              {"steps", steps},
              {"final_reward", t.final_reward},
              {"seed", t.seed},
              {"round", t.round}};
}

AgentAction action_from_json(const json& j) {
  AgentAction a;
  a.thought = j.at("thought").get<std::string>();
  a.command = j.at("command").get<std::string>();
  a.raw = j.at("raw").get<std::string>();
  return a;
}

Observation observation_from_json(const json& j) {
  Observation o;
  o.text = j.at("text").get<std::string>();
  o.score = j.at("score").get<double>();
  o.done = j.at("done").get<bool>();
  return o;
}

Critique critique_from_json(const json& j) {
  Critique c;
  c.contribution = j.at("contribution").get<std::string>();
  c.feasibility = j.at("feasibility").get<std::string>();
  c.efficiency = j.at("efficiency").get<std::string>();
  c.grade = grade_from_string(j.at("grade").get<std::string>());
  if (!j.at("suggested_revision").is_null()) {
    c.suggested_revision = j.at("suggested_revision").get<std::string>();
  }
  c.raw = j.at("raw").get<std::string>();
  return c;
}

Instruction instruction_from_json(const json& j) {
  Instruction ins;
  ins.task_id = j.at("task_id").get<std::string>();
  ins.env_id = j.at("env_id").get<std::string>();
  ins.text = j.at("text").get<std::string>();
  if (!j.at("gold_path").is_null()) {
    ins.gold_path = j.at("gold_path").get<std::vector<std::string>>();
  }
  if (!j.at("oracle_length").is_null()) {
    ins.oracle_length = j.at("oracle_length").get<int>();
  }
  return ins;
}

Step step_from_json(const json& j) {
  Step s;
  s.index = j.at("t").get<int>();
  for (const auto& c : j.at("candidates")) {
    s.candidates.candidates.push_back(action_from_json(c));
  }
  for (const auto& c : j.at("critiques")) {
    s.candidates.critiques.push_back(critique_from_json(c));
  }
  s.refined_action = action_from_json(j.at("action"));
  s.observation.text = j.at("observation").get<std::string>();
  s.observation.score = j.at("score").get<double>();
  s.observation.done = j.at("done").get<bool>();
  return s;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.instruction = instruction_from_json(j.at("instruction"));
  for (const auto& s : j.at("steps")) t.steps.push_back(step_from_json(s));
  t.final_reward = j.at("final_reward").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.round = j.at("round").get<int>();
  return t;
}

namespace {

std::string header_line(const Instruction& ins, std::uint64_t seed, int round) {
  return json{{"task_id", ins.task_id},
              {"env_id", ins.env_id},
              {"seed", seed},
              {"round", round}}
      .dump();
}

}  // namespace

TrajectoryLogWriter::TrajectoryLogWriter(const std::string& path,
                                         const Instruction& ins,
                                         std::uint64_t seed, int round)
    : path_(path) {
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw Error("cannot open trajectory log for writing: " + path_);
  out << header_line(ins, seed, round) << '\n';
}

void TrajectoryLogWriter::append_line(const std::string& line) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error("cannot append to trajectory log: " + path_);
  out << line << '\n';
  out.flush();
}

void TrajectoryLogWriter::write_step(const Step& step) {
  append_line(to_json(step).dump());
}

void TrajectoryLogWriter::write_final(double reward) {
  append_line(json{{"final_reward", reward}}.dump());
}

LoadedTrajectory read_trajectory_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectory log: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty trajectory log: " + path);

  LoadedTrajectory out;
  json header = json::parse(line);
  out.trajectory.instruction.task_id = header.at("task_id").get<std::string>();
  out.trajectory.instruction.env_id = header.at("env_id").get<std::string>();
  out.trajectory.seed = header.at("seed").get<std::uint64_t>();
  out.trajectory.round = header.at("round").get<int>();

  bool finalized = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (finalized) throw Error("content after final_reward line: " + path);
    json j = json::parse(line);
    if (j.contains("final_reward")) {
      out.trajectory.final_reward = j.at("final_reward").get<double>();
      finalized = true;
    } else {
      out.trajectory.steps.push_back(step_from_json(j));
    }
  }
  out.aborted = !finalized;
  if (!finalized && !out.trajectory.steps.empty()) {
    out.trajectory.final_reward = out.trajectory.steps.back().observation.score;
  }
  return out;
}

std::string trajectory_log_bytes(const Trajectory& t) {
  std::string out = header_line(t.instruction, t.seed, t.round) + "\n";
  for (const auto& s : t.steps) out += to_json(s).dump() + "\n";
  out += json{{"final_reward", t.final_reward}}.dump() + "\n";
  return out;
}

}  // namespace cgi
