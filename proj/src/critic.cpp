#include "cgi/critic.hpp"

#include <utility>

#include "cgi/prompts.hpp"

namespace cgi {
namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) out += '\n';
    out += lines[i];
  }
  return out;
}

// Single pass: replaces {name} tokens from the substitution table, leaving
// unknown tokens (and the substituted content) untouched.
std::string fill_template(const std::string& tmpl,
                          const std::vector<std::pair<std::string, std::string>>& subs) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    std::size_t close = tmpl.find('}', open);
    if (close == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    std::string name = tmpl.substr(open + 1, close - open - 1);
    bool replaced = false;
    for (const auto& [key, value] : subs) {
      if (key == name) {
        out += value;
        replaced = true;
        break;
      }
    }
    if (!replaced) out.append(tmpl, open, close - open + 1);
    pos = close + 1;
  }
  return out;
}

void require_placeholder(const std::string& tmpl, const std::string& name) {
  if (tmpl.find("{" + name + "}") == std::string::npos) {
    throw MissingPlaceholder("critique template lacks {" + name + "}");
  }
}

struct RubricTexts {
  std::string contribution;
  std::string feasibility;
  std::string efficiency;
};

const std::string kFeasible = "The command is well-formed and executable in the current state.";

}  // namespace

ChatTurns render_critique_prompt(const CritiqueRequest& req) {
  const bool expert = req.gold_path.has_value();
  const std::string& tmpl = expert ? critique_template_gold() : critique_template_plain();
  require_placeholder(tmpl, "history");
  require_placeholder(tmpl, "candidate_action");
  if (expert) require_placeholder(tmpl, "gold_path");

  std::vector<std::pair<std::string, std::string>> subs = {
      {"available_actions", req.available_actions},
      {"history", req.history},
      {"candidate_action", req.candidate.command},
  };
  if (expert) subs.emplace_back("gold_path", join_lines(*req.gold_path));
  return {ChatTurn{Role::Human, fill_template(tmpl, subs)}};
}

OracleCritic::OracleCritic(craft::RecipeGraph graph) : graph_(std::move(graph)) {}

Critique OracleCritic::critique(const CritiqueRequest& req) {
  if (!req.gold_path || req.gold_path->empty()) {
    throw Error("oracle critic requires a nonempty gold path");
  }
  const auto& gold = *req.gold_path;
  const std::size_t n = count_history_steps(req.history);

  // Target: the item produced (or fetched) by the last gold action.
  std::string target;
  {
    craft::CraftCommand last = craft::parse_command(gold.back());
    if (const auto* craft_cmd = std::get_if<craft::CraftCmd>(&last)) {
      target = craft_cmd->output;
    } else if (const auto* get_cmd = std::get_if<craft::GetCmd>(&last)) {
      target = get_cmd->item;
    } else {
      throw Error("gold path ends with a non-productive action");
    }
  }

  if (n >= gold.size()) {
    // Episode ran past the gold plan.
    return make_critique(
        "The task should already be complete; no further actions are needed.",
        "No further action is required at this point.",
        "Any additional step is redundant.", Grade::VeryPoor, std::nullopt);
  }

  // State after the gold prefix the rendered history corresponds to.
  std::map<std::string, int> inventory;
  for (std::size_t i = 0; i < n; ++i) {
    auto outcome = craft::apply_command(graph_, inventory, craft::parse_command(gold[i]));
    inventory = std::move(outcome.inventory);
  }
  const std::string& gold_next = gold[n];

  auto graded = [&](RubricTexts texts, Grade grade,
                    std::optional<std::string> revision) {
    return make_critique(std::move(texts.contribution), std::move(texts.feasibility),
                         std::move(texts.efficiency), grade, std::move(revision));
  };

  if (craft::commands_equal(req.candidate.command, gold_next)) {
    return graded({"This action directly advances the task along the optimal solution.",
                   kFeasible,
                   "It is exactly the optimal next step; no redundancy is introduced."},
                  Grade::Excellent, std::nullopt);
  }

  craft::CraftCommand cmd;
  try {
    cmd = craft::parse_command(req.candidate.command);
  } catch (const UnparsableCommand&) {
    return graded({"The action cannot contribute to the task because it is not a valid command.",
                   "The command does not match any allowed action type.",
                   "An invalid action wastes a step."},
                  Grade::Poor, gold_next);
  }

  // Unknown item references are a feasibility violation.
  bool unknown_item = false;
  if (const auto* get_cmd = std::get_if<craft::GetCmd>(&cmd)) {
    unknown_item = !graph_.known_item(get_cmd->item) && !graph_.is_tag(get_cmd->item);
  } else if (const auto* craft_cmd = std::get_if<craft::CraftCmd>(&cmd)) {
    unknown_item = !graph_.known_item(craft_cmd->output);
    for (const auto& [item, count] : craft_cmd->inputs) {
      if (!graph_.known_item(item) && !graph_.is_tag(item)) unknown_item = true;
    }
  }
  if (unknown_item) {
    return graded({"The action cannot contribute because it refers to something that does not exist in this task.",
                   "The command references an item that is not part of this task.",
                   "An infeasible action wastes a step."},
                  Grade::Poor, gold_next);
  }

  auto outcome = craft::apply_command(graph_, inventory, cmd);
  if (!outcome.changed) {
    std::string feasibility =
        outcome.kind == craft::ApplyOutcome::Kind::Listed
            ? "The command is executable but only inspects the inventory."
            : "The command cannot be executed in the current state.";
    return graded({"This action does not produce any useful effect right now.",
                   std::move(feasibility),
                   "It wastes a step without making progress."},
                  Grade::VeryPoor, gold_next);
  }

  auto gold_outcome =
      craft::apply_command(graph_, inventory, craft::parse_command(gold_next));
  if (outcome.inventory == gold_outcome.inventory) {
    return graded({"This action has the same effect on the inventory as the optimal next step.",
                   kFeasible,
                   "It matches the optimal next step in effect, so no extra steps are incurred."},
                  Grade::Good, gold_next);
  }

  int pre_work = craft::remaining_work_units(graph_, target, inventory);
  int post_work = craft::remaining_work_units(graph_, target, outcome.inventory);
  if (post_work < pre_work) {
    return graded({"This action acquires materials that are still needed later, but deviates from the optimal order.",
                   kFeasible,
                   "It makes partial progress but is not the most direct next step."},
                  Grade::Neutral, gold_next);
  }
  if (post_work > pre_work) {
    return graded({"This action consumes materials that are still required for the task.",
                   kFeasible,
                   "It moves the task backwards and forces extra steps to recover."},
                  Grade::VeryPoor, gold_next);
  }
  return graded({"This action does not bring the task closer to completion.",
                 kFeasible,
                 "It repeats work or gathers materials that are not needed."},
                Grade::VeryPoor, gold_next);
}

DegradedCritic::DegradedCritic(std::unique_ptr<Critic> inner, double flip_prob,
                               std::uint64_t seed)
    : inner_(std::move(inner)), flip_prob_(flip_prob),
      rng_(hash64(seed, "degraded-critic")) {}

Critique DegradedCritic::critique(const CritiqueRequest& req) {
  Critique c = inner_->critique(req);
  if (rng_.chance(flip_prob_)) {
    c.grade = static_cast<Grade>(rng_.below(5));
    c.raw = render_critique(c);
  }
  return c;
}

RemoteCritic::RemoteCritic(std::shared_ptr<ChatClient> client, double temperature)
    : client_(std::move(client)), temperature_(temperature) {}

Critique RemoteCritic::critique(const CritiqueRequest& req) {
  ChatTurns prompt = render_critique_prompt(req);
  std::string raw = client_->complete(prompt, temperature_);
  return parse_critique(raw);
}

}  // namespace cgi
