#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cgi/chat.hpp"
#include "cgi/chat_client.hpp"
#include "cgi/craftsim.hpp"
#include "cgi/rng.hpp"
#include "cgi/trajectory.hpp"

namespace cgi {

struct ActorConfig {
  enum class Backend { Scripted, Remote };
  Backend backend = Backend::Scripted;
  int m_candidates = 5;      // M
  double temperature = 1.0;  // remote sampling
  double fidelity = 1.0;     // scripted: probability of emitting the gold next action
  bool dedup_candidates = false;
};

struct ParsedAction {
  AgentAction action;
  bool marker_found = true;
};

// Splits model output on the last "Action:" marker (start-of-line occurrences
// preferred, inline accepted, case-insensitive). Without a marker the whole
// text becomes the command and marker_found is false.
ParsedAction parse_thought_action(const std::string& raw);

class Actor {
 public:
  virtual ~Actor() = default;
  // Exactly M candidates in sampling order; candidate 0 is the baseline.
  virtual CandidateBuffer sample_candidates(const ChatTurns& prompt) = 0;
  // Requires one critique per candidate.
  virtual AgentAction refine_action(const ChatTurns& prompt, const CandidateBuffer& buffer) = 0;
};

// Deterministic desk-scale actor driven by the episode seed. Candidate
// draws emit the task's gold next action with probability `fidelity`, else
// a uniformly chosen well-formed distractor command. The gold position is
// the executed-step count, i.e. the number of assistant turns in the
// prompt.
class ScriptedActor : public Actor {
 public:
  ScriptedActor(const ActorConfig& cfg, const craft::CraftTask& task,
                std::uint64_t episode_seed);

  CandidateBuffer sample_candidates(const ChatTurns& prompt) override;
  AgentAction refine_action(const ChatTurns& prompt, const CandidateBuffer& buffer) override;

  static AgentAction make_action(const std::string& command, const std::string& thought);

 private:
  std::string draw_command(const std::string& gold_next);

  ActorConfig cfg_;
  std::vector<std::string> gold_path_;
  std::vector<std::string> distractors_;
  Rng rng_;
};

// Chat-completion backed actor.
class RemoteActor : public Actor {
 public:
  RemoteActor(const ActorConfig& cfg, std::shared_ptr<ChatClient> client);

  CandidateBuffer sample_candidates(const ChatTurns& prompt) override;
  AgentAction refine_action(const ChatTurns& prompt, const CandidateBuffer& buffer) override;

 private:
  ActorConfig cfg_;
  std::shared_ptr<ChatClient> client_;
};

}  // namespace cgi
