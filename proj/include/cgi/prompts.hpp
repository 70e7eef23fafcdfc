#pragma once

#include <map>
#include <span>
#include <string>

#include "cgi/chat.hpp"
#include "cgi/trajectory.hpp"

namespace cgi {

// System prompts and per-environment action catalogs, keyed by env_id.
// The builtin registry carries the shipped assets; load_directory overlays
// <env_id>.txt files on top of it.
class PromptRegistry {
 public:
  static PromptRegistry builtin();

  void register_env(const std::string& env_id, std::string system_prompt,
                    std::string available_actions);
  void load_directory(const std::string& dir);

  bool has(const std::string& env_id) const;
  const std::string& system_prompt(const std::string& env_id) const;      // throws UnknownEnvPrompt
  const std::string& available_actions(const std::string& env_id) const;  // throws UnknownEnvPrompt

 private:
  struct EnvPrompts {
    std::string system;
    std::string available_actions;
  };
  std::map<std::string, EnvPrompts> envs_;
};

// Critique instruction templates with {available_actions}, {history},
// {candidate_action} and, in the gold variant, {gold_path} placeholders.
const std::string& critique_template_plain();
const std::string& critique_template_gold();

// Verbatim text block appended as a human turn when the actor is asked to
// refine: all candidates, their critiques, and the final-action request.
std::string render_refine_turn(const CandidateBuffer& buffer);

// Chat prompt for the actor: system asset, the task text, then the
// episode's refined actions and observations as alternating turns.
ChatTurns render_actor_prompt(const PromptRegistry& registry, const std::string& env_id,
                              const Instruction& instruction,
                              std::span<const Step> steps);

}  // namespace cgi
