#include "cgi/craftsim.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "cgi/rng.hpp"

namespace cgi::craft {
namespace {

std::string normalize_name(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

// Splits a "<count?> <name>" fragment; count defaults to 1.
std::pair<std::string, int> parse_counted_item(std::string_view fragment) {
  std::string norm = normalize_name(fragment);
  if (norm.empty()) throw UnparsableCommand("empty item name");
  int count = 1;
  std::size_t space = norm.find(' ');
  std::string head = space == std::string::npos ? norm : norm.substr(0, space);
  if (!head.empty() && std::all_of(head.begin(), head.end(), [](unsigned char c) {
        return std::isdigit(c) != 0;
      })) {
    try {
      count = std::stoi(head);
    } catch (const std::out_of_range&) {
      throw UnparsableCommand("count out of range: " + head);
    }
    if (count < 1) throw UnparsableCommand("count must be positive");
    if (space == std::string::npos) throw UnparsableCommand("missing item name");
    norm = norm.substr(space + 1);
  }
  if (norm.empty()) throw UnparsableCommand("missing item name");
  return {norm, count};
}

std::string counted(const std::string& item, int count) {
  if (count == 1) return item;
  return std::to_string(count) + " " + item;
}

std::string bracketed(const std::string& item, int count) {
  return "[" + item + "] (" + std::to_string(count) + ")";
}

}  // namespace

bool RecipeGraph::known_item(const std::string& name) const {
  if (base_items.count(name)) return true;
  if (item_tags.count(name)) return true;
  for (const auto& r : recipes) {
    if (r.output == name) return true;
  }
  return false;
}

bool RecipeGraph::is_tag(const std::string& name) const {
  for (const auto& [item, tags] : item_tags) {
    if (std::find(tags.begin(), tags.end(), name) != tags.end()) return true;
  }
  return false;
}

const Recipe* RecipeGraph::recipe_for(const std::string& output) const {
  for (const auto& r : recipes) {
    if (r.output == output) return &r;
  }
  return nullptr;
}

std::vector<std::string> RecipeGraph::items_with_tag(const std::string& tag) const {
  std::vector<std::string> out;
  for (const auto& [item, tags] : item_tags) {
    if (std::find(tags.begin(), tags.end(), tag) != tags.end()) out.push_back(item);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> RecipeGraph::all_items() const {
  std::set<std::string> items(base_items.begin(), base_items.end());
  for (const auto& r : recipes) {
    items.insert(r.output);
    for (const auto& [name, count] : r.inputs) {
      if (!is_tag(name) || known_item(name)) items.insert(name);
    }
  }
  for (const auto& [item, tags] : item_tags) items.insert(item);
  return {items.begin(), items.end()};
}

namespace {

// Resolves an input name to the concrete items able to satisfy it.
std::vector<std::string> resolve_input(const RecipeGraph& g, const std::string& name) {
  if (g.base_items.count(name) || g.recipe_for(name) != nullptr) return {name};
  auto tagged = g.items_with_tag(name);
  return tagged;
}

int longest_chain_impl(const RecipeGraph& g, const std::string& item,
                       std::map<std::string, int>& memo,
                       std::set<std::string>& visiting) {
  if (auto it = memo.find(item); it != memo.end()) return it->second;
  if (g.is_base(item)) return memo[item] = 0;
  if (visiting.count(item)) throw Error("recipe cycle through item: " + item);
  const Recipe* r = g.recipe_for(item);
  if (r == nullptr) throw Error("non-base item has no recipe: " + item);
  visiting.insert(item);
  int best = 0;
  for (const auto& [name, count] : r->inputs) {
    auto options = resolve_input(g, name);
    if (options.empty()) throw Error("recipe input resolves to nothing: " + name);
    // A tag input's chain is the shortest satisfying option; a concrete
    // input is just itself.
    int chain = std::numeric_limits<int>::max();
    for (const auto& opt : options) {
      chain = std::min(chain, longest_chain_impl(g, opt, memo, visiting));
    }
    best = std::max(best, chain);
  }
  visiting.erase(item);
  return memo[item] = best + 1;
}

}  // namespace

int RecipeGraph::longest_chain(const std::string& item) const {
  std::map<std::string, int> memo;
  std::set<std::string> visiting;
  return longest_chain_impl(*this, item, memo, visiting);
}

void RecipeGraph::validate() const {
  for (const auto& r : recipes) {
    if (r.inputs.empty()) throw Error("recipe with empty inputs: " + r.output);
    if (r.output_count < 1) throw Error("recipe output count < 1: " + r.output);
    for (const auto& [name, count] : r.inputs) {
      if (count < 1) throw Error("recipe input count < 1: " + r.output);
      if (name == r.output) throw Error("recipe output among inputs: " + r.output);
    }
  }
  for (const auto& r : recipes) {
    longest_chain(r.output);  // throws on cycles / missing recipes / bad inputs
  }
}

CraftCommand parse_command(const std::string& text) {
  std::string norm = normalize_name(text);
  if (norm == "inventory") return InventoryCmd{};
  if (norm.rfind("get ", 0) == 0) {
    auto [item, count] = parse_counted_item(norm.substr(4));
    return GetCmd{item, count};
  }
  if (norm.rfind("craft ", 0) == 0) {
    std::string rest = norm.substr(6);
    std::size_t using_pos = rest.find(" using ");
    if (using_pos == std::string::npos) {
      throw UnparsableCommand("craft command missing 'using': " + text);
    }
    auto [output, output_count] = parse_counted_item(rest.substr(0, using_pos));
    CraftCmd cmd{output, output_count, {}};
    std::string inputs = rest.substr(using_pos + 7);
    std::size_t start = 0;
    while (true) {
      std::size_t comma = inputs.find(',', start);
      std::string fragment = comma == std::string::npos
                                 ? inputs.substr(start)
                                 : inputs.substr(start, comma - start);
      auto [item, count] = parse_counted_item(fragment);
      cmd.inputs.emplace_back(item, count);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return cmd;
  }
  throw UnparsableCommand("not a crafting command: " + text);
}

std::string render_command(const CraftCommand& cmd) {
  if (std::holds_alternative<InventoryCmd>(cmd)) return "inventory";
  if (const auto* get = std::get_if<GetCmd>(&cmd)) {
    return "get " + counted(get->item, get->count);
  }
  const auto& craft = std::get<CraftCmd>(cmd);
  std::string out = "craft " + counted(craft.output, craft.output_count) + " using ";
  for (std::size_t i = 0; i < craft.inputs.size(); ++i) {
    if (i > 0) out += ", ";
    out += counted(craft.inputs[i].first, craft.inputs[i].second);
  }
  return out;
}

std::string normalize_command(const std::string& text) {
  try {
    CraftCommand cmd = parse_command(text);
    if (std::holds_alternative<InventoryCmd>(cmd)) return "inventory";
    if (const auto* get = std::get_if<GetCmd>(&cmd)) {
      return "get " + std::to_string(get->count) + " " + get->item;
    }
    CraftCmd craft = std::get<CraftCmd>(cmd);
    std::sort(craft.inputs.begin(), craft.inputs.end());
    std::string out =
        "craft " + std::to_string(craft.output_count) + " " + craft.output + " using ";
    for (std::size_t i = 0; i < craft.inputs.size(); ++i) {
      if (i > 0) out += ", ";
      out += std::to_string(craft.inputs[i].second) + " " + craft.inputs[i].first;
    }
    return out;
  } catch (const UnparsableCommand&) {
    return normalize_name(text);
  }
}

bool commands_equal(const std::string& a, const std::string& b) {
  return normalize_command(a) == normalize_command(b);
}

int default_max_steps(int oracle_length) {
  return std::max(10, 4 * oracle_length);
}

std::pair<CraftState, Observation> env_reset(const CraftTask& task, std::uint64_t) {
  CraftState state;
  state.target = normalize_name(task.target);
  Observation obs;
  obs.text = "Task started. Craft 1 [" + state.target + "].";
  obs.score = 0.0;
  obs.done = false;
  return {state, obs};
}

namespace {

struct Consumption {
  std::map<std::string, int> take;  // concrete item -> count
  bool covered = false;
};

// Plans which concrete inventory items satisfy a recipe, tag inputs
// drawing from carriers in sorted order. Does not mutate anything.
Consumption plan_consumption(const RecipeGraph& g,
                             const std::map<std::string, int>& inventory,
                             const Recipe& recipe) {
  Consumption plan;
  std::map<std::string, int> remaining = inventory;
  for (const auto& [name, need] : recipe.inputs) {
    int outstanding = need;
    bool concrete = g.base_items.count(name) || g.recipe_for(name) != nullptr;
    std::vector<std::string> sources =
        concrete ? std::vector<std::string>{name} : g.items_with_tag(name);
    for (const auto& item : sources) {
      if (outstanding == 0) break;
      auto it = remaining.find(item);
      if (it == remaining.end() || it->second <= 0) continue;
      int take = std::min(it->second, outstanding);
      plan.take[item] += take;
      it->second -= take;
      outstanding -= take;
    }
    if (outstanding > 0) return plan;  // covered stays false
  }
  plan.covered = true;
  return plan;
}

void prune_zeroes(std::map<std::string, int>& inv) {
  for (auto it = inv.begin(); it != inv.end();) {
    if (it->second <= 0) {
      it = inv.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace

ApplyOutcome apply_command(const RecipeGraph& graph,
                           const std::map<std::string, int>& inventory,
                           const CraftCommand& cmd, const CraftConfig& cfg) {
  ApplyOutcome out;
  out.inventory = inventory;
  if (std::holds_alternative<InventoryCmd>(cmd)) {
    out.kind = ApplyOutcome::Kind::Listed;
    return out;
  }
  if (const auto* get = std::get_if<GetCmd>(&cmd)) {
    if (cfg.get_quantity_cap > 0 && get->count > cfg.get_quantity_cap) {
      out.kind = ApplyOutcome::Kind::CapExceeded;
      return out;
    }
    if (!graph.is_base(get->item)) {
      out.kind = ApplyOutcome::Kind::NotBase;
      return out;
    }
    out.inventory[get->item] += get->count;
    out.kind = ApplyOutcome::Kind::Got;
    out.changed = true;
    return out;
  }
  const auto& craft = std::get<CraftCmd>(cmd);
  bool any_recipe = false;
  for (const auto& recipe : graph.recipes) {
    if (recipe.output != craft.output) continue;
    any_recipe = true;
    Consumption plan = plan_consumption(graph, out.inventory, recipe);
    if (!plan.covered) continue;
    for (const auto& [item, count] : plan.take) out.inventory[item] -= count;
    prune_zeroes(out.inventory);
    out.inventory[recipe.output] += recipe.output_count;
    out.kind = ApplyOutcome::Kind::Crafted;
    out.recipe = &recipe;
    out.changed = true;
    return out;
  }
  out.kind = any_recipe ? ApplyOutcome::Kind::MissingIngredients
                        : ApplyOutcome::Kind::NoRecipe;
  return out;
}

std::pair<CraftState, Observation> env_step(const CraftState& state,
                                            const RecipeGraph& graph,
                                            const AgentAction& action,
                                            const CraftConfig& cfg) {
  if (state.done) throw SteppedAfterDone("episode already finished");

  CraftState next = state;
  next.step_count += 1;
  std::string text;

  CraftCommand cmd;
  bool parsed = true;
  try {
    cmd = parse_command(action.command);
  } catch (const UnparsableCommand&) {
    parsed = false;
    text = "Could not execute \"" + action.command + "\".";
  }

  if (parsed) {
    ApplyOutcome outcome = apply_command(graph, next.inventory, cmd, cfg);
    switch (outcome.kind) {
      case ApplyOutcome::Kind::Listed: {
        if (next.inventory.empty()) {
          text = "Inventory: empty.";
        } else {
          text = "Inventory: ";
          bool first = true;
          for (const auto& [item, count] : next.inventory) {
            if (!first) text += ", ";
            text += bracketed(item, count);
            first = false;
          }
        }
        break;
      }
      case ApplyOutcome::Kind::Got: {
        const auto& get = std::get<GetCmd>(cmd);
        text = "Got " + std::to_string(get.count) + " [" + get.item + "].";
        break;
      }
      case ApplyOutcome::Kind::CapExceeded: {
        const auto& get = std::get<GetCmd>(cmd);
        text = "Cannot get more than " + std::to_string(cfg.get_quantity_cap) + " [" +
               get.item + "] at once.";
        break;
      }
      case ApplyOutcome::Kind::NotBase: {
        text = "Could not find " + std::get<GetCmd>(cmd).item + ".";
        break;
      }
      case ApplyOutcome::Kind::Crafted: {
        next.crafted_items.insert(outcome.recipe->output);
        text = "Crafted " + std::to_string(outcome.recipe->output_count) + " [" +
               outcome.recipe->output + "].";
        break;
      }
      case ApplyOutcome::Kind::MissingIngredients: {
        text = "Could not craft " + std::get<CraftCmd>(cmd).output +
               ": missing ingredients.";
        break;
      }
      case ApplyOutcome::Kind::NoRecipe: {
        text = "Could not craft " + std::get<CraftCmd>(cmd).output + ": no known recipe.";
        break;
      }
    }
    next.inventory = std::move(outcome.inventory);
  }

  bool target_held = false;
  if (auto it = next.inventory.find(next.target); it != next.inventory.end()) {
    target_held = it->second > 0;
  }
  if (target_held && !next.done) {
    next.done = true;
    text += " Task completed!";
  }
  if (!next.done && cfg.max_steps > 0 && next.step_count >= cfg.max_steps) {
    next.done = true;
    text += " Out of steps.";
  }

  Observation obs;
  obs.text = text;
  obs.score = target_held ? 1.0 : 0.0;
  obs.done = next.done;
  return {next, obs};
}

double progress_fraction(const CraftState& state, const RecipeGraph& graph) {
  std::set<std::string> ancestors;
  std::function<void(const std::string&)> walk = [&](const std::string& item) {
    if (graph.is_base(item) || ancestors.count(item)) return;
    const Recipe* r = graph.recipe_for(item);
    if (r == nullptr) return;
    ancestors.insert(item);
    for (const auto& [name, count] : r->inputs) {
      for (const auto& opt : resolve_input(graph, name)) walk(opt);
    }
  };
  walk(state.target);
  if (ancestors.empty()) return state.done ? 1.0 : 0.0;
  int crafted = 0;
  for (const auto& item : ancestors) {
    if (state.crafted_items.count(item)) ++crafted;
  }
  return static_cast<double>(crafted) / static_cast<double>(ancestors.size());
}

namespace {

struct DemandPlan {
  std::map<std::string, int> base_gets;    // base item -> units to get
  std::vector<std::pair<std::string, int>> craft_execs;  // topo order, executions
};

// Net demand propagation from the target down to base items, crediting
// the starting inventory. Consumers are settled before suppliers, so
// inventory credit is applied exactly once per item.
DemandPlan demand_plan(const RecipeGraph& g, const std::string& target,
                       const std::map<std::string, int>& inventory) {
  // Topological order (inputs before outputs) over concrete items,
  // deterministic via name-ordered exploration.
  std::vector<std::string> topo;
  std::set<std::string> seen;
  std::function<void(const std::string&)> visit = [&](const std::string& item) {
    if (seen.count(item)) return;
    seen.insert(item);
    if (const Recipe* r = g.recipe_for(item)) {
      std::vector<std::string> deps;
      for (const auto& [name, count] : r->inputs) {
        auto options = resolve_input(g, name);
        if (options.empty()) throw UnsolvableTask("input resolves to nothing: " + name);
        // Planning consumes the first option in sorted order.
        deps.push_back(options.front());
      }
      std::sort(deps.begin(), deps.end());
      for (const auto& d : deps) visit(d);
    } else if (!g.is_base(item)) {
      throw UnsolvableTask("no recipe and not a base item: " + item);
    }
    topo.push_back(item);
  };
  visit(target);

  std::map<std::string, int> need;
  need[target] = 1;
  DemandPlan plan;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const std::string& item = *it;
    int gross = need.count(item) ? need[item] : 0;
    if (gross <= 0) continue;
    int have = 0;
    if (auto inv = inventory.find(item); inv != inventory.end()) have = inv->second;
    int net = std::max(0, gross - have);
    if (net == 0) continue;
    if (g.is_base(item)) {
      plan.base_gets[item] += net;
      continue;
    }
    const Recipe* r = g.recipe_for(item);
    int execs = (net + r->output_count - 1) / r->output_count;
    plan.craft_execs.emplace_back(item, execs);
    for (const auto& [name, count] : r->inputs) {
      need[resolve_input(g, name).front()] += execs * count;
    }
  }
  // craft_execs was filled target-first; flip to dependency order.
  std::reverse(plan.craft_execs.begin(), plan.craft_execs.end());
  return plan;
}

}  // namespace

std::vector<std::string> plan_from_inventory(const RecipeGraph& graph,
                                             const std::string& target,
                                             const std::map<std::string, int>& inventory) {
  if (auto it = inventory.find(target); it != inventory.end() && it->second > 0) {
    return {};
  }
  DemandPlan plan = demand_plan(graph, target, inventory);
  std::vector<std::string> actions;
  for (const auto& [item, units] : plan.base_gets) {
    actions.push_back(render_command(GetCmd{item, units}));
  }
  for (const auto& [item, execs] : plan.craft_execs) {
    const Recipe* r = graph.recipe_for(item);
    CraftCmd cmd{r->output, r->output_count, r->inputs};
    for (int i = 0; i < execs; ++i) actions.push_back(render_command(cmd));
  }
  return actions;
}

std::vector<std::string> oracle_solve(const CraftTask& task) {
  return plan_from_inventory(task.graph, normalize_name(task.target), {});
}

int remaining_work_units(const RecipeGraph& graph, const std::string& target,
                         const std::map<std::string, int>& inventory) {
  if (auto it = inventory.find(target); it != inventory.end() && it->second > 0) {
    return 0;
  }
  DemandPlan plan = demand_plan(graph, target, inventory);
  int units = 0;
  for (const auto& [item, n] : plan.base_gets) units += n;
  for (const auto& [item, execs] : plan.craft_execs) units += execs;
  return units;
}

std::string build_instruction_text(const RecipeGraph& graph, const std::string& target) {
  std::string text = "Crafting commands:\n";
  for (const auto& r : graph.recipes) {
    text += render_command(CraftCmd{r.output, r.output_count, r.inputs});
    text += '\n';
  }
  text += "Goal: craft " + target + ".";
  return text;
}

namespace {

const std::vector<std::string> kMaterials = {
    "oak",    "birch",  "spruce", "dark oak", "iron",   "copper",
    "golden", "stone",  "flint",  "crimson",  "azure",  "amber",
    "jade",   "cobalt", "ivory",  "obsidian", "maple",  "ashen",
    "silver", "bronze", "coral",  "ember",    "frost",  "moss"};

const std::vector<std::string> kForms = {
    "log",    "plank",   "stick",  "ingot",  "gear",   "rod",
    "plate",  "dust",    "crystal","brick",  "shard",  "coil",
    "lens",   "frame",   "hinge",  "bolt",   "panel",  "cog",
    "fiber",  "block",   "tile",   "core",   "spring", "disc"};

struct TaskBuilder {
  Rng& rng;
  std::vector<std::string> name_pool;
  std::size_t next_name_index = 0;
  RecipeGraph graph;
  std::vector<std::vector<std::string>> by_level;

  explicit TaskBuilder(Rng& r, int depth) : rng(r), by_level(depth + 1) {
    name_pool.reserve(kMaterials.size() * kForms.size());
    for (const auto& m : kMaterials) {
      for (const auto& f : kForms) name_pool.push_back(m + " " + f);
    }
    rng.shuffle(name_pool);
  }

  std::string fresh_name() {
    if (next_name_index >= name_pool.size()) {
      throw GenerationOverflow("item name pool exhausted");
    }
    return name_pool[next_name_index++];
  }

  std::string make_item(int level, int branching);
};

std::string TaskBuilder::make_item(int level, int branching) {
  std::string name = fresh_name();
  by_level[level].push_back(name);
  if (level == 0) {
    graph.base_items.insert(name);
    return name;
  }
  int n_inputs = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(branching)));
  Recipe recipe;
  recipe.output = name;
  recipe.output_count = rng.below(4) == 0 ? 2 : 1;
  std::set<std::string> used;
  for (int i = 0; i < n_inputs; ++i) {
    int input_level = i == 0 ? level - 1
                             : static_cast<int>(rng.below(static_cast<std::uint64_t>(level)));
    std::string input;
    bool reuse = !by_level[input_level].empty() && rng.chance(0.4);
    if (reuse) {
      input = rng.pick(by_level[input_level]);
      if (used.count(input) || (i == 0 && input_level != level - 1)) reuse = false;
    }
    if (!reuse) {
      input = make_item(input_level, branching);
    }
    if (used.count(input)) continue;  // duplicate reuse collapses the slot
    used.insert(input);
    int count = rng.below(4) == 0 ? 2 : 1;
    recipe.inputs.emplace_back(input, count);
  }
  graph.recipes.push_back(std::move(recipe));
  return name;
}

}  // namespace

std::vector<CraftTask> generate_tasks(const GenParams& params) {
  if (params.depth < 1 || params.branching < 1 || params.count < 1) {
    throw Error("generate_tasks: depth, branching, and count must be >= 1");
  }
  std::vector<CraftTask> tasks;
  tasks.reserve(static_cast<std::size_t>(params.count));
  for (int i = 0; i < params.count; ++i) {
    CraftTask task;
    bool built = false;
    for (int attempt = 0; attempt < 32 && !built; ++attempt) {
      Rng rng(hash64(hash64(params.seed, static_cast<std::uint64_t>(i)),
                     static_cast<std::uint64_t>(attempt)));
      TaskBuilder builder(rng, params.depth);
      std::string target = builder.make_item(params.depth, params.branching);
      RecipeGraph graph = std::move(builder.graph);
      try {
        graph.validate();
      } catch (const Error&) {
        continue;
      }
      if (graph.longest_chain(target) != params.depth) continue;

      rng.shuffle(graph.recipes);
      task.graph = std::move(graph);
      task.target = target;
      task.depth = params.depth;
      task.instruction.env_id = "craftsim";
      task.instruction.task_id =
          "craft_d" + std::to_string(params.depth) + "_s" + std::to_string(params.seed) +
          "_" + std::to_string(i);
      task.instruction.text = build_instruction_text(task.graph, target);
      task.instruction.gold_path = oracle_solve(task);
      task.instruction.oracle_length = static_cast<int>(task.instruction.gold_path->size());
      built = true;
    }
    if (!built) {
      throw GenerationOverflow("could not generate task " + std::to_string(i) +
                               " within bounded attempts");
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

nlohmann::json task_to_json(const CraftTask& task) {
  nlohmann::json recipes = nlohmann::json::array();
  for (const auto& r : task.graph.recipes) {
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& [item, count] : r.inputs) {
      inputs.push_back({{"item", item}, {"count", count}});
    }
    recipes.push_back({{"output", r.output},
                       {"output_count", r.output_count},
                       {"inputs", inputs}});
  }
  nlohmann::json j{{"task_id", task.instruction.task_id},
                   {"target", task.target},
                   {"recipes", recipes},
                   {"base_items", nlohmann::json(task.graph.base_items)},
                   {"gold_path", task.instruction.gold_path
                                     ? nlohmann::json(*task.instruction.gold_path)
                                     : nlohmann::json::array()},
                   {"depth", task.depth}};
  if (!task.graph.item_tags.empty()) j["item_tags"] = task.graph.item_tags;
  return j;
}

CraftTask task_from_json(const nlohmann::json& j) {
  CraftTask task;
  task.instruction.task_id = j.at("task_id").get<std::string>();
  task.instruction.env_id = "craftsim";
  task.target = normalize_name(j.at("target").get<std::string>());
  task.depth = j.at("depth").get<int>();
  for (const auto& r : j.at("recipes")) {
    Recipe recipe;
    recipe.output = normalize_name(r.at("output").get<std::string>());
    recipe.output_count = r.at("output_count").get<int>();
    for (const auto& in : r.at("inputs")) {
      recipe.inputs.emplace_back(normalize_name(in.at("item").get<std::string>()),
                                 in.at("count").get<int>());
    }
    task.graph.recipes.push_back(std::move(recipe));
  }
  for (const auto& b : j.at("base_items")) {
    task.graph.base_items.insert(normalize_name(b.get<std::string>()));
  }
  if (j.contains("item_tags")) {
    for (const auto& [item, tags] : j.at("item_tags").items()) {
      for (const auto& t : tags) {
        task.graph.item_tags[normalize_name(item)].push_back(
            normalize_name(t.get<std::string>()));
      }
    }
  }
  auto gold = j.at("gold_path").get<std::vector<std::string>>();
  if (!gold.empty()) {
    task.instruction.gold_path = gold;
    task.instruction.oracle_length = static_cast<int>(gold.size());
  }
  task.instruction.text = build_instruction_text(task.graph, task.target);
  return task;
}

void write_task_file(const std::string& path, const std::vector<CraftTask>& tasks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : tasks) arr.push_back(task_to_json(t));
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open task file for writing: " + path);
  out << nlohmann::json{{"tasks", arr}}.dump(2) << '\n';
}

std::vector<CraftTask> read_task_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open task file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  std::vector<CraftTask> tasks;
  std::set<std::string> ids;
  for (const auto& t : j.at("tasks")) {
    CraftTask task = task_from_json(t);
    if (task.instruction.task_id.empty()) {
      throw Error("task file contains an empty task_id: " + path);
    }
    if (!ids.insert(task.instruction.task_id).second) {
      throw Error("duplicate task_id in task file: " + task.instruction.task_id);
    }
    task.graph.validate();
    tasks.push_back(std::move(task));
  }
  return tasks;
}

CraftEnv::CraftEnv(CraftTask task, CraftConfig cfg) : task_(std::move(task)), cfg_(cfg) {
  if (cfg_.max_steps == 0) {
    int oracle_len = task_.instruction.oracle_length.value_or(0);
    cfg_.max_steps = default_max_steps(oracle_len);
  }
  state_.target = normalize_name(task_.target);
}

Observation CraftEnv::reset(std::uint64_t seed) {
  auto [state, obs] = env_reset(task_, seed);
  state_ = std::move(state);
  started_ = true;
  return obs;
}

Observation CraftEnv::step(const AgentAction& action) {
  if (!started_) throw EpisodeNotReset("step before reset on task " + task_.instruction.task_id);
  auto [state, obs] = env_step(state_, task_.graph, action, cfg_);
  state_ = std::move(state);
  return obs;
}

Observation CraftEnv::step_command(const std::string& command) {
  AgentAction action;
  action.command = command;
  action.raw = command;
  return step(action);
}

}  // namespace cgi::craft
