#include "cgi/actor.hpp"

#include <algorithm>
#include <cctype>

#include "cgi/prompts.hpp"

namespace cgi {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_quotes(std::string s) {
  while (s.size() >= 2) {
    char a = s.front(), b = s.back();
    if ((a == '"' && b == '"') || (a == '\'' && b == '\'') || (a == '`' && b == '`')) {
      s = trim(s.substr(1, s.size() - 2));
    } else {
      break;
    }
  }
  return s;
}

// Last occurrence of "action:"; positions at line starts win over inline.
std::size_t find_action_marker(const std::string& raw) {
  const std::string hay = lower(raw);
  const std::string needle = "action:";
  std::size_t best_line_start = std::string::npos;
  std::size_t best_inline = std::string::npos;
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    bool at_line_start = pos == 0 || hay[pos - 1] == '\n';
    if (at_line_start) {
      best_line_start = pos;
    } else {
      best_inline = pos;
    }
    pos += needle.size();
  }
  return best_line_start != std::string::npos ? best_line_start : best_inline;
}

int count_assistant_turns(const ChatTurns& prompt) {
  int n = 0;
  for (const auto& turn : prompt) {
    if (turn.role == Role::Assistant) ++n;
  }
  return n;
}

}  // namespace

ParsedAction parse_thought_action(const std::string& raw) {
  ParsedAction out;
  out.action.raw = raw;
  std::size_t marker = find_action_marker(raw);
  if (marker == std::string::npos) {
    out.marker_found = false;
    out.action.command = strip_quotes(trim(raw));
    return out;
  }
  out.action.command = strip_quotes(trim(raw.substr(marker + 7)));

  std::string head = raw.substr(0, marker);
  const std::string head_lower = lower(head);
  std::size_t thought = head_lower.find("thought:");
  if (thought != std::string::npos) {
    out.action.thought = trim(head.substr(thought + 8));
  } else {
    out.action.thought = trim(head);
  }
  return out;
}

ScriptedActor::ScriptedActor(const ActorConfig& cfg, const craft::CraftTask& task,
                             std::uint64_t episode_seed)
    : cfg_(cfg), rng_(hash64(episode_seed, "scripted-actor")) {
  if (task.instruction.gold_path) gold_path_ = *task.instruction.gold_path;

  // Distractor pool: a get for every known item (feasible or not), every
  // crafting command from the task sheet, and the inventory query.
  for (const auto& item : task.graph.all_items()) {
    distractors_.push_back("get " + item);
  }
  for (const auto& recipe : task.graph.recipes) {
    distractors_.push_back(craft::render_command(
        craft::CraftCmd{recipe.output, recipe.output_count, recipe.inputs}));
  }
  distractors_.push_back("inventory");
}

AgentAction ScriptedActor::make_action(const std::string& command,
                                       const std::string& thought) {
  AgentAction a;
  a.command = command;
  a.thought = thought;
  a.raw = "Thought: " + thought + "\nAction: " + command;
  return a;
}

std::string ScriptedActor::draw_command(const std::string& gold_next) {
  if (!gold_next.empty() && rng_.chance(cfg_.fidelity)) return gold_next;
  std::vector<const std::string*> pool;
  pool.reserve(distractors_.size());
  for (const auto& d : distractors_) {
    if (gold_next.empty() || !craft::commands_equal(d, gold_next)) pool.push_back(&d);
  }
  if (pool.empty()) return gold_next;
  return *pool[static_cast<std::size_t>(rng_.below(pool.size()))];
}

CandidateBuffer ScriptedActor::sample_candidates(const ChatTurns& prompt) {
  int step = count_assistant_turns(prompt);
  std::string gold_next;
  if (step < static_cast<int>(gold_path_.size())) {
    gold_next = gold_path_[static_cast<std::size_t>(step)];
  }
  CandidateBuffer buffer;
  for (int i = 0; i < cfg_.m_candidates; ++i) {
    std::string cmd = draw_command(gold_next);
    buffer.candidates.push_back(make_action(cmd, "Next I will " + cmd + "."));
  }
  return buffer;
}

AgentAction ScriptedActor::refine_action(const ChatTurns&, const CandidateBuffer& buffer) {
  if (buffer.candidates.empty() ||
      buffer.critiques.size() != buffer.candidates.size()) {
    throw NoCritiques("refine_action requires one critique per candidate");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < buffer.critiques.size(); ++i) {
    if (buffer.critiques[i].grade > buffer.critiques[best].grade) best = i;
  }
  const Critique& top = buffer.critiques[best];
  if (top.grade >= Grade::Good) {
    return buffer.candidates[best];
  }
  if (top.suggested_revision) {
    try {
      craft::parse_command(*top.suggested_revision);
      return make_action(trim(*top.suggested_revision),
                         "Applying the suggested revision.");
    } catch (const UnparsableCommand&) {
      // fall through to the baseline candidate
    }
  }
  return buffer.candidates[0];
}

RemoteActor::RemoteActor(const ActorConfig& cfg, std::shared_ptr<ChatClient> client)
    : cfg_(cfg), client_(std::move(client)) {}

CandidateBuffer RemoteActor::sample_candidates(const ChatTurns& prompt) {
  auto outputs = client_->complete_n(prompt, cfg_.m_candidates, cfg_.temperature);
  CandidateBuffer buffer;
  auto push = [&](const std::string& raw, bool skip_duplicates) {
    ParsedAction parsed = parse_thought_action(raw);
    if (skip_duplicates) {
      for (const auto& c : buffer.candidates) {
        if (craft::commands_equal(c.command, parsed.action.command)) return;
      }
    }
    buffer.candidates.push_back(parsed.action);
  };
  for (const auto& raw : outputs) push(raw, cfg_.dedup_candidates);
  // Dedup can shrink the buffer below M; resample with a bounded budget,
  // then accept duplicates rather than loop forever.
  int dedup_budget = 2 * cfg_.m_candidates;
  while (static_cast<int>(buffer.candidates.size()) < cfg_.m_candidates) {
    auto extra = client_->complete_n(prompt, 1, cfg_.temperature);
    push(extra.front(), cfg_.dedup_candidates && dedup_budget-- > 0);
  }
  return buffer;
}

AgentAction RemoteActor::refine_action(const ChatTurns& prompt,
                                       const CandidateBuffer& buffer) {
  if (buffer.critiques.size() != buffer.candidates.size() || buffer.candidates.empty()) {
    throw NoCritiques("refine_action requires one critique per candidate");
  }
  ChatTurns turns = prompt;
  turns.push_back({Role::Human, render_refine_turn(buffer)});
  std::string raw = client_->complete(turns, cfg_.temperature);
  return parse_thought_action(raw).action;
}

}  // namespace cgi
