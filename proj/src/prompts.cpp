#include "cgi/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cgi/errors.hpp"

namespace cgi {
namespace {

const std::string kScienceWorldPrompt = R"(You are an agent for the science world. Every round I will give you an observation, you have to respond with an action based on the observation to finish the given task.
Here are the actions you may take:
{"action": "open/close OBJ", "description": "open/close a container",}
{"action": "de/activate OBJ", "description": "activate/deactivate a device",}
{"action": "connect OBJ to OBJ", "description": "connect electrical components", }
{"action": "disconnect OBJ", "description": "disconnect electrical components",}
{"action": "use OBJ [on OBJ]", "description": "use a device/item",}
{"action": "look around", "description": "describe the current room",}
{"action": "look at OBJ", "description": "describe an object in detail",}
{"action": "look in OBJ", "description": "describe a container's contents",}
{"action": "read OBJ", "description": "read a note or book",}
{"action": "move OBJ to OBJ", "description": "move an object to a container", }
{"action": "pick up OBJ", "description": "move an object to the inventory", }
{"action": "put down OBJ", "description": "drop an inventory item",}
{"action": "pour OBJ into OBJ", "description": "pour a liquid into a container", }
{"action": "dunk OBJ into OBJ", "description": "dunk a container into a liquid", }
{"action": "mix OBJ", "description": "chemically mix a container",}
{"action": "go to LOC", "description": "move to a new location",}
{"action": "eat OBJ", "description": "eat a food",}
{"action": "flush OBJ", "description": "flush a toilet",}
{"action": "focus on OBJ", "description": "signal intent on a task object",}
{"action": "wait", "description": "take no action for 10 iterations",}
{"action": "wait1", "description": "take no action for 1 iteration", }
{"action": "task", "description": "describe current task",}
{"action": "inventory", "description": "list your inventory"}
Your response should use the following format:

Thought: your thoughts.
Action: your next action)";

const std::string kWebShopPrompt = R"(You are web shopping. I will give you instructions about what to do. You have to follow the instructions. Every round I will give you an observation and a list of available actions, you have to respond an action based on the state and instruction.
You can use search action if search is available. You can click one of the buttons in clickables. An action should be of the following structure: search[keywords] click[value]. If the action is not valid, perform nothing. Keywords in search are up to you, but the value in click must be a value in the list of available actions. Remember that your keywords in search should be carefully designed. Your response should use the following format:

Thought: I think ...
Action: click[something] or search[something])";

const std::string kTextCraftPrompt = R"(You are given a few useful crafting recipes to craft items in Minecraft. Crafting commands are of the format "craft [target object] using [input ingredients]". Every round I will give you an observation, you have to respond to an action based on the state and instruction. You can "get" an object (ingredients) from the inventory or the environment, look up the game "inventory" by inventory, or "craft" (target) using any of the crafting commands. You can use ONLY these crafting commands provided, do not use your own crafting commands. However, if the crafting command uses a generic ingredient like "planks", you can use special types of the same ingredient e.g. dark oak "planks" in the command instead. Your response should use the following format:

Thought: ...
Action: ...)";

const std::string kCraftActions = R"(Allowed Action Types:
- get [count] [item]: take a base ingredient from the environment
- craft [item] using [ingredients]: execute one of the provided crafting commands
- inventory: list the items you are carrying)";

const std::string kWebShopActions = R"(Allowed Action Types:
- search[KEYWORDS]: perform a web search
- click[OBJ]: click an object or link on a webpage)";

const std::string kScienceWorldActions =
    R"(Allowed Action Types: the action list given in the task instruction.)";

const std::string kCritiquePlain =
    R"(Your task is to critique the candidate's next-step action based on the agent's task goal and interaction history.

{available_actions}

Critique Steps
Step 1: Analyze Candidate Action
Examine the candidate's action based on the following criteria and assign an overall grade using this scale: Excellent, Good, Neutral, Poor, Very Poor.

Critique Dimensions
- Contribution: Assess whether the action contributes to completing the agent's task. This includes both direct actions (e.g., picking up the target OBJ) and indirect actions (e.g., reasonable exploration that can provide additional environmental information and facilitate future progress).
- Feasibility: Assess whether the action is valid according to the agent's predefined Allowed Action Types list.
- Efficiency: Analyze whether the action optimally achieves the task without unnecessary steps or redundancy.

Step 2: Provide Revision Suggestions
Suggest a modification to align the candidate's action better with the task or the agent's action capabilities. Note that the suggested revision should be based on the Allowed Action and Object Types.

Critique Format
Please structure your critique in the following format:
## Contribution: [Analysis of Contribution].
## Feasibility: [Analysis of feasibility].
## Efficiency: [Analysis of efficiency].
## Overall Grading: [Overall grade: Excellent/Good/Neutral/Poor/Very Poor].
## Suggested Revision: [Brief revision suggestion, if applicable].

Inputs:
The agent's task goal and interaction history:

{history}

Candidate next step action: {candidate_action}

Now, please provide your critique:)";

const std::string kCritiqueGold =
    R"(Your task is to critique the candidate next-step action based on the agent's task goal and interaction history. The gold path for current task is provided as a reference to guide your critique, but do not explicitly mention it in your critique.

{available_actions}

Critique Steps

Step 1: Analyze Candidate Action
Examine the candidate's action based on the following criteria, then assign an overall grade using this scale: Excellent, Good, Neutral, Poor, Very Poor.

Critique Dimensions
-Contribution: Assess whether the action contributes to completing the agent's task. This includes both direct actions (e.g., picking up the target OBJ) and indirect actions (e.g., reasonable exploration that can provide additional environmental information and facilitate future progress).
-Feasibility: Assess whether the action is valid according to the agent's predefined Allowed Action Types list.
-Efficiency: Analyze whether the action optimally achieves the task without unnecessary steps or redundancy.

Step 2: Provide Revision Suggestions
Suggest a modification to align the candidate's action better with the task or the agent's action capabilities. For example, if the action is not allowed, recommend an alternative from the action list that aligns better with the task goal.

Critique Format
Please structure your critique in the following format:
## Contribution: [Analysis of Contribution].
## Feasibility: [Analysis of feasibility].
## Efficiency: [Analysis of efficiency].
## Overall Grading: [Overall grade: Excellent/Good/Neutral/Poor/Very Poor].
## Suggested Revision: [Brief revision suggestion, if applicable].

Referenced Gold Path for Current Task:

{gold_path}

Inputs:
The agent's task goal and interaction history:

{history}

Candidate next step action: {candidate_action}

Now, please provide your critique:)";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read prompt file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

PromptRegistry PromptRegistry::builtin() {
  PromptRegistry r;
  r.register_env("craftsim", kTextCraftPrompt, kCraftActions);
  r.register_env("textcraft", kTextCraftPrompt, kCraftActions);
  r.register_env("webshop", kWebShopPrompt, kWebShopActions);
  r.register_env("scienceworld", kScienceWorldPrompt, kScienceWorldActions);
  return r;
}

void PromptRegistry::register_env(const std::string& env_id, std::string system_prompt,
                                  std::string available_actions) {
  envs_[env_id] = EnvPrompts{std::move(system_prompt), std::move(available_actions)};
}

void PromptRegistry::load_directory(const std::string& dir) {
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::string env_id = entry.path().stem().string();
    std::string content = read_file(entry.path());
    auto it = envs_.find(env_id);
    std::string actions = it != envs_.end() ? it->second.available_actions : std::string();
    register_env(env_id, std::move(content), std::move(actions));
  }
}

bool PromptRegistry::has(const std::string& env_id) const {
  return envs_.count(env_id) > 0;
}

const std::string& PromptRegistry::system_prompt(const std::string& env_id) const {
  auto it = envs_.find(env_id);
  if (it == envs_.end()) throw UnknownEnvPrompt("no prompt asset for env: " + env_id);
  return it->second.system;
}

const std::string& PromptRegistry::available_actions(const std::string& env_id) const {
  auto it = envs_.find(env_id);
  if (it == envs_.end()) throw UnknownEnvPrompt("no prompt asset for env: " + env_id);
  return it->second.available_actions;
}

const std::string& critique_template_plain() { return kCritiquePlain; }
const std::string& critique_template_gold() { return kCritiqueGold; }

std::string render_refine_turn(const CandidateBuffer& buffer) {
  if (buffer.critiques.size() != buffer.candidates.size() || buffer.candidates.empty()) {
    throw NoCritiques("refine turn requires one critique per candidate");
  }
  std::string out = "Candidate actions and critiques:\n";
  for (std::size_t i = 0; i < buffer.candidates.size(); ++i) {
    out += "\n[Candidate " + std::to_string(i + 1) + "]\n";
    out += buffer.candidates[i].raw;
    out += "\n[Critique " + std::to_string(i + 1) + "]\n";
    out += buffer.critiques[i].raw;
    out += "\n";
  }
  out +=
      "\nBased on the critiques above, respond with your final action for this "
      "step. Your response should use the following format:\n\nThought: ...\nAction: ...";
  return out;
}

ChatTurns render_actor_prompt(const PromptRegistry& registry, const std::string& env_id,
                              const Instruction& instruction,
                              std::span<const Step> steps) {
  ChatTurns turns;
  turns.push_back({Role::System, registry.system_prompt(env_id)});
  turns.push_back({Role::Human, instruction.text});
  for (const auto& step : steps) {
    turns.push_back({Role::Assistant, step.refined_action.raw});
    turns.push_back({Role::Human, step.observation.text});
  }
  return turns;
}

}  // namespace cgi
