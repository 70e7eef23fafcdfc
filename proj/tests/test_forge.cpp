#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"

#include "cgi/actor.hpp"
#include "cgi/forge.hpp"
#include "cgi/orchestrator.hpp"

using namespace cgi;
using namespace cgi::forge;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

// Harvest from a guided run: every episode succeeds, every step critiqued.
RoundHarvest guided_harvest(int n_tasks, std::uint64_t seed,
                            std::vector<craft::CraftTask>* tasks_out = nullptr) {
  auto tasks = craft::generate_tasks({2, 2, n_tasks, seed});
  EpisodeConfig cfg;
  cfg.actor.fidelity = 0.5;
  cfg.actor.m_candidates = 5;
  cfg.critic = CriticKind::Oracle;
  cfg.master_seed = seed;
  cfg.workers = 2;
  Runtime runtime = make_local_runtime(cfg);
  if (tasks_out != nullptr) *tasks_out = tasks;
  return run_exploration(runtime, 1, tasks);
}

std::string file_bytes(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::vector<DatasetRecord> tiny_general(int n) {
  std::vector<DatasetRecord> out;
  for (int i = 0; i < n; ++i) {
    DatasetRecord r;
    r.pool = "general";
    r.conversations = {{Role::Human, "question " + std::to_string(i)},
                       {Role::Assistant, "answer " + std::to_string(i)}};
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("critique records pair every candidate with its critique") {
  RoundHarvest harvest = guided_harvest(2, 31);
  PromptRegistry prompts = PromptRegistry::builtin();
  auto records = build_critique_records(prompts, harvest.d_refine, "run-x");
  // steps x M
  std::size_t steps = harvest.d_refine.size();
  CHECK(records.size() == steps * 5);
  for (const auto& r : records) {
    CHECK(r.pool == "critique");
    REQUIRE(r.conversations.size() == 2);
    CHECK(r.conversations[0].role == Role::Human);
    CHECK(r.conversations[1].role == Role::Assistant);
    // the gold path never leaks into training inputs
    CHECK(r.conversations[0].content.find("Referenced Gold Path") == std::string::npos);
    CHECK(r.conversations[0].content.find("Now, please provide your critique:") !=
          std::string::npos);
    CHECK(r.conversations[1].content.find("## Overall Grading:") != std::string::npos);
    REQUIRE(r.provenance.has_value());
    CHECK(r.provenance->run_id == "run-x");
    validate_record_json(record_to_json(r));
  }
}

TEST_CASE("correct records rebuild full conversations without critiques") {
  RoundHarvest harvest = guided_harvest(2, 32);
  PromptRegistry prompts = PromptRegistry::builtin();
  auto records = build_correct_records(prompts, harvest.d_correct, "run-y");
  REQUIRE(records.size() == harvest.d_correct.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto& traj = harvest.d_correct[i];
    CHECK(r.pool == "correct");
    CHECK(r.system == prompts.system_prompt("craftsim"));
    // one gpt turn per step
    std::size_t gpt_turns = 0;
    for (const auto& turn : r.conversations) {
      if (turn.role == Role::Assistant) ++gpt_turns;
      CHECK(turn.content.find("## Overall Grading") == std::string::npos);  // pool purity
    }
    CHECK(gpt_turns == traj.steps.size());
    CHECK(r.conversations.front().content == traj.instruction.text);
    CHECK(r.conversations.back().role == Role::Assistant);
    // assistant turns replay through the thought/action parser
    std::size_t step = 0;
    for (const auto& turn : r.conversations) {
      if (turn.role != Role::Assistant) continue;
      ParsedAction parsed = parse_thought_action(turn.content);
      CHECK(parsed.marker_found);
      CHECK(craft::commands_equal(parsed.action.command,
                                  traj.steps[step].refined_action.command));
      ++step;
    }
    validate_record_json(record_to_json(r));
  }
}

TEST_CASE("refine records carry all candidates and critiques") {
  RoundHarvest harvest = guided_harvest(2, 33);
  PromptRegistry prompts = PromptRegistry::builtin();
  auto records = build_refine_records(prompts, harvest.d_refine, "run-z");
  REQUIRE(records.size() == harvest.d_refine.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    CHECK(r.pool == "refine");
    REQUIRE(r.conversations.size() == 2);
    // exactly M critique blocks in the human turn
    std::size_t blocks = 0, pos = 0;
    while ((pos = r.conversations[0].content.find("[Critique ", pos)) != std::string::npos) {
      ++blocks;
      pos += 10;
    }
    CHECK(blocks == 5);
    CHECK(r.conversations[1].content == harvest.d_refine[i].refined.raw);
    validate_record_json(record_to_json(r));
  }

  // only-revised filtering drops steps where candidate 0 was kept
  auto revised_only = build_refine_records(prompts, harvest.d_refine, "run-z", false);
  std::size_t revised = 0;
  for (const auto& e : harvest.d_refine) {
    if (!craft::commands_equal(e.refined.command, e.buffer.candidates[0].command)) ++revised;
  }
  CHECK(revised_only.size() == revised);
  CHECK(revised_only.size() < records.size());
}

TEST_CASE("builders reject sources whose reward is not exactly 1") {
  RoundHarvest harvest = guided_harvest(1, 34);
  PromptRegistry prompts = PromptRegistry::builtin();

  auto bad_trajs = harvest.d_correct;
  bad_trajs[0].final_reward = 0.99;
  CHECK_THROWS_AS(build_correct_records(prompts, bad_trajs, "r"), RewardFilterViolation);

  auto bad_entries = harvest.d_refine;
  bad_entries[0].parent_reward = 0.0;
  CHECK_THROWS_AS(build_refine_records(prompts, bad_entries, "r"), RewardFilterViolation);
  CHECK_THROWS_AS(build_critique_records(prompts, bad_entries, "r"), RewardFilterViolation);

  auto no_critiques = harvest.d_refine;
  no_critiques[0].buffer.critiques.clear();
  CHECK_THROWS_AS(build_refine_records(prompts, no_critiques, "r"), MissingCritiques);
}

TEST_CASE("expert records replay gold paths") {
  std::vector<craft::CraftTask> tasks = craft::generate_tasks({2, 2, 3, 35});
  PromptRegistry prompts = PromptRegistry::builtin();
  auto records = build_expert_records(prompts, tasks, "run-e");
  REQUIRE(records.size() == tasks.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].pool == "expert");
    std::size_t gpt_turns = 0;
    for (const auto& turn : records[i].conversations) {
      if (turn.role == Role::Assistant) ++gpt_turns;
    }
    CHECK(gpt_turns == tasks[i].instruction.gold_path->size());
    validate_record_json(record_to_json(records[i]));
  }
}

TEST_CASE("union_train dedups by task and conversation bytes, expert wins") {
  std::vector<craft::CraftTask> tasks;
  RoundHarvest harvest = guided_harvest(3, 36, &tasks);
  PromptRegistry prompts = PromptRegistry::builtin();
  auto expert = build_expert_records(prompts, tasks, "r");
  auto correct = build_correct_records(prompts, harvest.d_correct, "r");

  SUBCASE("disjoint inputs concatenate") {
    auto merged = union_train(expert, correct);
    CHECK(merged.size() == expert.size() + correct.size());
  }
  SUBCASE("identical records collapse to the expert copy") {
    auto clones = expert;
    for (auto& r : clones) r.pool = "correct";
    auto merged = union_train(expert, clones);
    CHECK(merged.size() == expert.size());
    for (const auto& r : merged) CHECK(r.pool == "expert");
  }
  SUBCASE("empty correct is identity") {
    auto merged = union_train(expert, {});
    CHECK(merged.size() == expert.size());
  }
}

TEST_CASE("record schema checker accepts emitted records and rejects bad shapes") {
  CHECK_THROWS(validate_record_json(nlohmann::json::array()));
  CHECK_THROWS(validate_record_json({{"system", ""}, {"conversations", nlohmann::json::array()}}));
  // must end with gpt
  CHECK_THROWS(validate_record_json(
      {{"system", ""},
       {"conversations", {{{"from", "human"}, {"value", "hi"}}}}}));
  // roles must alternate human-first
  CHECK_THROWS(validate_record_json(
      {{"system", ""},
       {"conversations",
        {{{"from", "gpt"}, {"value", "hi"}}, {{"from", "human"}, {"value", "yo"}}}}}));
  CHECK_NOTHROW(validate_record_json(
      {{"system", "s"},
       {"conversations",
        {{{"from", "human"}, {"value", "hi"}}, {{"from", "gpt"}, {"value", "yo"}}}}}));
}

TEST_CASE("dataset files are arrays with one record per line") {
  TempDir dir("cgi_forge_lines");
  auto records = tiny_general(7);
  std::string path = (fs::path(dir.str()) / "pool.json").string();
  write_records(path, records);
  CHECK(count_record_lines(path) == 7);
  auto loaded = read_records(path);
  CHECK(loaded == records);

  std::string empty_path = (fs::path(dir.str()) / "empty.json").string();
  write_records(empty_path, {});
  CHECK(count_record_lines(empty_path) == 0);
  CHECK(read_records(empty_path).empty());
}

TEST_CASE("mix produces exact rounded shares deterministically") {
  TempDir dir("cgi_forge_mix");
  std::string agentic_path = (fs::path(dir.str()) / "agentic.json").string();
  std::string general_path = (fs::path(dir.str()) / "general.json").string();
  auto agentic = tiny_general(40);
  for (auto& r : agentic) {
    r.pool = "correct";
    r.provenance = Provenance{"r", 1, "t", -1, "craftsim"};
  }
  write_records(agentic_path, agentic);
  write_records(general_path, tiny_general(40));

  MixSpec spec;
  spec.beta = 0.8;
  spec.agentic_files = {agentic_path};
  spec.general_file = general_path;
  spec.total = 10;
  spec.seed = 77;
  std::string out = (fs::path(dir.str()) / "mixed.json").string();
  Manifest manifest = mix_datasets(spec, out);
  CHECK(manifest.agentic_count == 8);
  CHECK(manifest.general_count == 2);
  CHECK(count_record_lines(out) == 10);

  std::string bytes1 = file_bytes(out);
  mix_datasets(spec, out);
  CHECK(file_bytes(out) == bytes1);  // same seed, same bytes

  spec.seed = 78;
  mix_datasets(spec, out);
  CHECK(file_bytes(out) != bytes1);  // the seed matters

  SUBCASE("beta 1.0 needs no general source") {
    MixSpec pure;
    pure.beta = 1.0;
    pure.agentic_files = {agentic_path};
    pure.total = 5;
    Manifest m = mix_datasets(pure, out);
    CHECK(m.agentic_count == 5);
    CHECK(m.general_count == 0);
  }
  SUBCASE("beta 0.0 is all general") {
    MixSpec none;
    none.beta = 0.0;
    none.agentic_files = {agentic_path};
    none.general_file = general_path;
    none.total = 6;
    Manifest m = mix_datasets(none, out);
    CHECK(m.agentic_count == 0);
    CHECK(m.general_count == 6);
  }
  SUBCASE("requested totals cap to the supply") {
    MixSpec big;
    big.beta = 0.5;
    big.agentic_files = {agentic_path};
    big.general_file = general_path;
    big.total = 1000;
    Manifest m = mix_datasets(big, out);
    CHECK(m.capped);
    CHECK(m.agentic_count + m.general_count <= 80);
    CHECK(m.agentic_count == 40);
  }
  SUBCASE("empty pools with nonzero weight are an error") {
    std::string empty_path = (fs::path(dir.str()) / "none.json").string();
    write_records(empty_path, {});
    MixSpec starved;
    starved.beta = 0.8;
    starved.agentic_files = {empty_path};
    starved.general_file = general_path;
    CHECK_THROWS_AS(mix_datasets(starved, out), EmptyPool);
  }
}

TEST_CASE("provenance audit passes a clean run and flags tampering") {
  std::vector<craft::CraftTask> tasks = craft::generate_tasks({2, 2, 3, 37});
  TempDir dir("cgi_forge_audit");
  EpisodeConfig cfg;
  cfg.actor.fidelity = 0.5;
  cfg.critic = CriticKind::Oracle;
  cfg.master_seed = 38;
  Runtime runtime = make_local_runtime(cfg);
  IterateOptions options;
  options.rounds = 2;
  options.beta = 1.0;
  options.out_dir = dir.str();
  options.emit_critiques = true;
  run_iterations(runtime, tasks, options);

  AuditReport clean = audit_provenance(dir.str());
  CHECK(clean.records_checked > 0);
  CHECK(clean.violations == 0);

  // point one record at a nonexistent trajectory
  std::string correct_path =
      (fs::path(dir.str()) / "round_1" / "datasets" / "correct.json").string();
  auto records = read_records(correct_path);
  REQUIRE_FALSE(records.empty());
  records[0].provenance->task_id = "forged-task";
  write_records(correct_path, records);
  AuditReport dirty = audit_provenance(dir.str());
  CHECK(dirty.violations == 1);
}
