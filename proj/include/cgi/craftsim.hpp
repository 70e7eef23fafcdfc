#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cgi/errors.hpp"
#include "cgi/trajectory.hpp"

namespace cgi::craft {

struct Recipe {
  std::string output;
  int output_count = 1;
  std::vector<std::pair<std::string, int>> inputs;  // item or tag name, count

  bool operator==(const Recipe&) const = default;
};

// DAG of crafting rules. Item names are stored normalized (lowercase,
// single spaces). A recipe input may name a tag instead of an item; any
// inventory item carrying that tag satisfies it.
struct RecipeGraph {
  std::vector<Recipe> recipes;
  std::set<std::string> base_items;
  std::map<std::string, std::vector<std::string>> item_tags;  // item -> tags

  bool is_base(const std::string& item) const { return base_items.count(item) > 0; }
  bool known_item(const std::string& name) const;
  bool is_tag(const std::string& name) const;
  const Recipe* recipe_for(const std::string& output) const;
  std::vector<std::string> items_with_tag(const std::string& tag) const;  // sorted
  std::vector<std::string> all_items() const;                             // sorted

  // Longest recipe chain from base items to `item` (base items are 0).
  int longest_chain(const std::string& item) const;

  // Throws Error if cyclic, a non-base item lacks a recipe, or an input
  // resolves to nothing.
  void validate() const;

  bool operator==(const RecipeGraph&) const = default;
};

struct GetCmd {
  std::string item;
  int count = 1;
  bool operator==(const GetCmd&) const = default;
};
struct InventoryCmd {
  bool operator==(const InventoryCmd&) const = default;
};
struct CraftCmd {
  std::string output;
  int output_count = 1;
  std::vector<std::pair<std::string, int>> inputs;
  bool operator==(const CraftCmd&) const = default;
};
using CraftCommand = std::variant<GetCmd, InventoryCmd, CraftCmd>;

// Grammar: `get <count?> <item>` | `inventory` |
// `craft <count?> <output> using <count?> <item> (, <count?> <item>)*`.
// Keywords and item names are case-insensitive; counts default to 1.
// Throws UnparsableCommand.
CraftCommand parse_command(const std::string& text);

// Human-readable rendering; counts of 1 are omitted.
std::string render_command(const CraftCommand& cmd);

// Canonical form used for command equality: parsed, lowercased, explicit
// counts, craft inputs sorted by item. Unparsable text falls back to
// lowercased whitespace-squeezed bytes.
std::string normalize_command(const std::string& text);

bool commands_equal(const std::string& a, const std::string& b);

struct CraftState {
  std::map<std::string, int> inventory;
  std::string target;
  int step_count = 0;
  bool done = false;
  std::set<std::string> crafted_items;  // outputs crafted so far (progress metric)

  bool operator==(const CraftState&) const = default;
};

struct CraftTask {
  Instruction instruction;
  RecipeGraph graph;
  std::string target;
  int depth = 1;

  bool operator==(const CraftTask&) const = default;
};

struct CraftConfig {
  int max_steps = 0;        // <= 0: no in-step limit (wrapper resolves default)
  int get_quantity_cap = 0; // <= 0: unlimited
};

// max(10, 4 * oracle_length)
int default_max_steps(int oracle_length);

std::pair<CraftState, Observation> env_reset(const CraftTask& task, std::uint64_t seed);

// Pure inventory transition for one parsed command; the single place the
// multiset semantics live. env_step and the oracle grading rubric both go
// through it.
struct ApplyOutcome {
  enum class Kind { Got, Crafted, Listed, NotBase, CapExceeded, MissingIngredients, NoRecipe };
  Kind kind = Kind::Listed;
  std::map<std::string, int> inventory;  // post-state (unchanged unless `changed`)
  const Recipe* recipe = nullptr;        // set when kind == Crafted
  bool changed = false;
};

ApplyOutcome apply_command(const RecipeGraph& graph,
                           const std::map<std::string, int>& inventory,
                           const CraftCommand& cmd, const CraftConfig& cfg = {});

// Applies one action. Invalid or unparsable actions produce an in-band
// failure observation and still consume a step. Throws SteppedAfterDone.
std::pair<CraftState, Observation> env_step(const CraftState& state,
                                            const RecipeGraph& graph,
                                            const AgentAction& action,
                                            const CraftConfig& cfg = {});

// Fraction of the target's non-base ancestor items (target included)
// crafted so far. Metrics only; never used for reward filtering.
double progress_fraction(const CraftState& state, const RecipeGraph& graph);

struct GenParams {
  int depth = 1;
  int branching = 1;
  int count = 1;
  std::uint64_t seed = 0;
};

// Deterministic procedural tasks: acyclic graphs whose longest chain is
// exactly `depth`, instruction text embedding the shuffled recipe list,
// and a gold path from oracle_solve. Throws GenerationOverflow.
std::vector<CraftTask> generate_tasks(const GenParams& params);

// Minimal get-then-craft plan from an arbitrary starting inventory:
// one get per deficient base item, then crafts in dependency order.
// Throws UnsolvableTask.
std::vector<std::string> plan_from_inventory(const RecipeGraph& graph,
                                             const std::string& target,
                                             const std::map<std::string, int>& inventory);

std::vector<std::string> oracle_solve(const CraftTask& task);

// Total remaining work units (get units + craft executions) to reach the
// target from `inventory`. Drives the oracle critic's progress analysis.
int remaining_work_units(const RecipeGraph& graph, const std::string& target,
                         const std::map<std::string, int>& inventory);

std::string build_instruction_text(const RecipeGraph& graph, const std::string& target);

// Task set file: {"tasks":[{"task_id","target","recipes":[...],
// "base_items":[...],"gold_path":[...],"depth"}]}
void write_task_file(const std::string& path, const std::vector<CraftTask>& tasks);
std::vector<CraftTask> read_task_file(const std::string& path);
nlohmann::json task_to_json(const CraftTask& task);
CraftTask task_from_json(const nlohmann::json& j);

// Single-episode stateful wrapper used by the episode runner and the
// bridge server.
class CraftEnv {
 public:
  CraftEnv(CraftTask task, CraftConfig cfg = {});

  Observation reset(std::uint64_t seed);
  Observation step(const AgentAction& action);
  Observation step_command(const std::string& command);

  const CraftState& state() const { return state_; }
  const CraftTask& task() const { return task_; }
  int max_steps() const { return cfg_.max_steps; }

 private:
  CraftTask task_;
  CraftConfig cfg_;
  CraftState state_;
  bool started_ = false;
};

}  // namespace cgi::craft
