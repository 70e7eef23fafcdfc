#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgi/chat.hpp"
#include "cgi/chat_client.hpp"
#include "cgi/craftsim.hpp"
#include "cgi/critique.hpp"
#include "cgi/rng.hpp"
#include "cgi/trajectory.hpp"

namespace cgi {

// One critique request covers a single candidate. gold_path is present iff
// the expert (gold-path) prompt variant applies.
struct CritiqueRequest {
  std::string env_id;
  std::string history;  // rendered interaction history
  AgentAction candidate;
  std::optional<std::vector<std::string>> gold_path;
  std::string available_actions;
};

// Fills the critique instruction template ({available_actions}, {history},
// {candidate_action}, and {gold_path} for the expert variant) and returns
// it as a single human turn. Throws MissingPlaceholder if a template lacks
// a required placeholder.
ChatTurns render_critique_prompt(const CritiqueRequest& req);

class Critic {
 public:
  virtual ~Critic() = default;
  virtual Critique critique(const CritiqueRequest& req) = 0;
};

// Deterministic gold-path critic for the crafting environment. Grades a
// candidate against the gold next action at the executed-step count:
//   Excellent  command equals the gold next action
//   Good       executes with the same inventory effect as the gold action
//   Neutral    executes and strictly reduces the remaining work
//   Poor       unparsable or references unknown items
//   Very Poor  everything else (fails, regresses, or wastes the step)
// Every grade below Excellent carries the gold action as the suggested
// revision; past the end of the gold path the grade is Very Poor with no
// revision.
class OracleCritic : public Critic {
 public:
  explicit OracleCritic(craft::RecipeGraph graph);
  Critique critique(const CritiqueRequest& req) override;

 private:
  craft::RecipeGraph graph_;
};

// Chaos wrapper: replaces the grade with a uniformly random level with
// probability flip_prob, re-rendering the critique text to stay canonical.
class DegradedCritic : public Critic {
 public:
  DegradedCritic(std::unique_ptr<Critic> inner, double flip_prob, std::uint64_t seed);
  Critique critique(const CritiqueRequest& req) override;

 private:
  std::unique_ptr<Critic> inner_;
  double flip_prob_;
  Rng rng_;
};

// Chat-completion backed critic; parses the model text into a structured
// critique (MissingGrade propagates to the caller).
class RemoteCritic : public Critic {
 public:
  RemoteCritic(std::shared_ptr<ChatClient> client, double temperature = 0.0);
  Critique critique(const CritiqueRequest& req) override;

 private:
  std::shared_ptr<ChatClient> client_;
  double temperature_;
};

}  // namespace cgi
