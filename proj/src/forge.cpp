#include "cgi/forge.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cgi/critic.hpp"
#include "cgi/rng.hpp"

namespace cgi::forge {
namespace {

using nlohmann::json;

const char* from_name(Role role) { return role == Role::Assistant ? "gpt" : "human"; }

json provenance_to_json(const Provenance& p) {
  json j{{"run_id", p.run_id},
         {"round", p.round},
         {"task_id", p.task_id},
         {"env_id", p.env_id}};
  if (p.step >= 0) j["step"] = p.step;
  return j;
}

Provenance provenance_from_json(const json& j) {
  Provenance p;
  p.run_id = j.value("run_id", "");
  p.round = j.value("round", 0);
  p.task_id = j.value("task_id", "");
  p.env_id = j.value("env_id", "");
  p.step = j.value("step", -1);
  return p;
}

void require_reward_one(double reward, const std::string& task_id) {
  if (reward != 1.0) {
    throw RewardFilterViolation("record source " + task_id + " has final_reward " +
                                std::to_string(reward) + ", expected exactly 1");
  }
}

}  // namespace

json record_to_json(const DatasetRecord& record) {
  json conversations = json::array();
  for (const auto& turn : record.conversations) {
    conversations.push_back({{"from", from_name(turn.role)}, {"value", turn.content}});
  }
  json j{{"conversations", conversations}, {"system", record.system},
         {"pool", record.pool}};
  if (record.provenance) j["provenance"] = provenance_to_json(*record.provenance);
  return j;
}

DatasetRecord record_from_json(const json& j) {
  DatasetRecord record;
  record.system = j.value("system", "");
  record.pool = j.value("pool", "");
  for (const auto& turn : j.at("conversations")) {
    Role role = turn.at("from").get<std::string>() == "gpt" ? Role::Assistant : Role::Human;
    record.conversations.push_back({role, turn.at("value").get<std::string>()});
  }
  if (j.contains("provenance")) record.provenance = provenance_from_json(j.at("provenance"));
  return record;
}

std::string conversation_bytes(const DatasetRecord& record) {
  json conversations = json::array();
  for (const auto& turn : record.conversations) {
    conversations.push_back({{"from", from_name(turn.role)}, {"value", turn.content}});
  }
  return json{{"conversations", conversations}, {"system", record.system}}.dump();
}

void validate_record_json(const json& j) {
  if (!j.is_object()) throw Error("record is not an object");
  if (!j.contains("system") || !j.at("system").is_string()) {
    throw Error("record lacks a system string");
  }
  if (!j.contains("conversations") || !j.at("conversations").is_array() ||
      j.at("conversations").empty()) {
    throw Error("record lacks a nonempty conversations array");
  }
  std::string expected = "human";
  for (const auto& turn : j.at("conversations")) {
    if (!turn.is_object() || !turn.contains("from") || !turn.contains("value") ||
        !turn.at("value").is_string()) {
      throw Error("conversation turn lacks from/value");
    }
    std::string from = turn.at("from").get<std::string>();
    if (from != expected) {
      throw Error("conversation roles must alternate human-first, got " + from);
    }
    expected = expected == "human" ? "gpt" : "human";
  }
  if (expected != "human") {
    throw Error("conversation must end with a gpt turn");
  }
}

void write_records(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot open dataset file for writing: " + path);
  if (records.empty()) {
    out << "[]\n";
    return;
  }
  out << "[\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << record_to_json(records[i]).dump();
    out << (i + 1 == records.size() ? "\n" : ",\n");
  }
  out << "]\n";
}

std::vector<DatasetRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file: " + path);
  json j = json::parse(in);
  if (!j.is_array()) throw Error("dataset file is not a JSON array: " + path);
  std::vector<DatasetRecord> records;
  records.reserve(j.size());
  for (const auto& r : j) records.push_back(record_from_json(r));
  return records;
}

std::size_t count_record_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file: " + path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '{') ++n;
  }
  return n;
}

std::string file_checksum_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for checksum: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char chunk[8192];
  while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(chunk[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<DatasetRecord> build_critique_records(const PromptRegistry& prompts,
                                                  const std::vector<RefineEntry>& entries,
                                                  const std::string& run_id) {
  std::vector<DatasetRecord> records;
  for (const auto& entry : entries) {
    require_reward_one(entry.parent_reward, entry.task_id);
    if (entry.buffer.critiques.size() != entry.buffer.candidates.size() ||
        entry.buffer.candidates.empty()) {
      throw MissingCritiques("entry for task " + entry.task_id + " step " +
                             std::to_string(entry.step) + " lacks critiques");
    }
    for (std::size_t i = 0; i < entry.buffer.candidates.size(); ++i) {
      CritiqueRequest req;
      req.env_id = entry.env_id;
      req.history = entry.history;
      req.candidate = entry.buffer.candidates[i];
      req.available_actions = prompts.available_actions(entry.env_id);
      ChatTurns prompt = render_critique_prompt(req);

      DatasetRecord record;
      record.pool = "critique";
      record.conversations.push_back({Role::Human, prompt.at(0).content});
      record.conversations.push_back({Role::Assistant, entry.buffer.critiques[i].raw});
      record.provenance =
          Provenance{run_id, entry.round, entry.task_id, entry.step, entry.env_id};
      if (record.conversations.front().content.find("Referenced Gold Path") !=
          std::string::npos) {
        throw Error("gold path leaked into a critique training input");
      }
      records.push_back(std::move(record));
    }
  }
  return records;
}

std::vector<DatasetRecord> build_correct_records(const PromptRegistry& prompts,
                                                 const std::vector<Trajectory>& trajectories,
                                                 const std::string& run_id) {
  std::vector<DatasetRecord> records;
  for (const auto& traj : trajectories) {
    require_reward_one(traj.final_reward, traj.instruction.task_id);
    if (traj.steps.empty()) continue;
    DatasetRecord record;
    record.pool = "correct";
    record.system = prompts.system_prompt(traj.instruction.env_id);
    record.conversations.push_back({Role::Human, traj.instruction.text});
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      record.conversations.push_back({Role::Assistant, traj.steps[t].refined_action.raw});
      if (t + 1 < traj.steps.size()) {
        record.conversations.push_back({Role::Human, traj.steps[t].observation.text});
      }
    }
    record.provenance = Provenance{run_id, traj.round, traj.instruction.task_id, -1,
                                   traj.instruction.env_id};
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<DatasetRecord> build_refine_records(const PromptRegistry& prompts,
                                                const std::vector<RefineEntry>& entries,
                                                const std::string& run_id,
                                                bool include_unrevised) {
  std::vector<DatasetRecord> records;
  for (const auto& entry : entries) {
    require_reward_one(entry.parent_reward, entry.task_id);
    if (entry.buffer.critiques.size() != entry.buffer.candidates.size() ||
        entry.buffer.candidates.empty()) {
      throw MissingCritiques("entry for task " + entry.task_id + " step " +
                             std::to_string(entry.step) + " lacks critiques");
    }
    if (!include_unrevised &&
        craft::commands_equal(entry.refined.command,
                              entry.buffer.candidates.front().command)) {
      continue;
    }
    DatasetRecord record;
    record.pool = "refine";
    record.system = prompts.system_prompt(entry.env_id);
    record.conversations.push_back(
        {Role::Human, entry.history + "\n\n" + render_refine_turn(entry.buffer)});
    record.conversations.push_back({Role::Assistant, entry.refined.raw});
    record.provenance =
        Provenance{run_id, entry.round, entry.task_id, entry.step, entry.env_id};
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<DatasetRecord> build_expert_records(const PromptRegistry& prompts,
                                                const std::vector<craft::CraftTask>& tasks,
                                                const std::string& run_id) {
  std::vector<DatasetRecord> records;
  for (const auto& task : tasks) {
    if (!task.instruction.gold_path || task.instruction.gold_path->empty()) {
      throw Error("task " + task.instruction.task_id + " has no gold path");
    }
    craft::CraftEnv env(task);
    env.reset(0);
    DatasetRecord record;
    record.pool = "expert";
    record.system = prompts.system_prompt(task.instruction.env_id);
    record.conversations.push_back({Role::Human, task.instruction.text});
    const auto& gold = *task.instruction.gold_path;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      AgentAction action =
          ScriptedActor::make_action(gold[i], "Executing the reference plan.");
      Observation obs = env.step(action);
      record.conversations.push_back({Role::Assistant, action.raw});
      if (i + 1 < gold.size()) {
        record.conversations.push_back({Role::Human, obs.text});
      }
      if (obs.done && i + 1 < gold.size()) {
        throw Error("gold path for " + task.instruction.task_id + " ended early");
      }
    }
    if (!env.state().done || env.state().inventory.count(env.state().target) == 0) {
      throw Error("gold path for " + task.instruction.task_id + " does not finish the task");
    }
    record.provenance =
        Provenance{run_id, 0, task.instruction.task_id, -1, task.instruction.env_id};
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<DatasetRecord> union_train(const std::vector<DatasetRecord>& expert,
                                       const std::vector<DatasetRecord>& correct) {
  std::vector<DatasetRecord> out;
  std::set<std::string> seen;
  auto key = [](const DatasetRecord& r) {
    std::string task = r.provenance ? r.provenance->task_id : "";
    return task + '\x1f' + conversation_bytes(r);
  };
  for (const auto& r : expert) {
    if (seen.insert(key(r)).second) out.push_back(r);
  }
  for (const auto& r : correct) {
    if (seen.insert(key(r)).second) out.push_back(r);
  }
  return out;
}

json Manifest::to_json() const {
  json counts_json = json::object();
  for (const auto& [env, pools] : counts) {
    json pools_json = json::object();
    for (const auto& [pool, n] : pools) pools_json[pool] = n;
    counts_json[env] = pools_json;
  }
  json files = json::object();
  for (const auto& [file, n] : file_records) {
    files[file] = json{{"records", n}, {"checksum", checksums.count(file) ? checksums.at(file) : ""}};
  }
  json j{{"round", round},
         {"counts", counts_json},
         {"files", files},
         {"agentic_count", agentic_count},
         {"general_count", general_count},
         {"capped", capped}};
  j["beta"] = beta ? json(*beta) : json(nullptr);
  return j;
}

Manifest count_records(int round, std::optional<double> beta,
                       const std::map<std::string, std::vector<DatasetRecord>>& files_by_name) {
  Manifest manifest;
  manifest.round = round;
  manifest.beta = beta;
  for (const auto& [file, records] : files_by_name) {
    manifest.file_records[file] = records.size();
    for (const auto& r : records) {
      std::string env = r.provenance ? r.provenance->env_id : "general";
      manifest.counts[env][r.pool] += 1;
    }
  }
  return manifest;
}

Manifest mix_datasets(const MixSpec& spec, const std::string& out_path) {
  if (spec.beta < 0.0 || spec.beta > 1.0) throw Error("beta must be in [0,1]");

  std::vector<DatasetRecord> agentic;
  for (const auto& file : spec.agentic_files) {
    auto records = read_records(file);
    agentic.insert(agentic.end(), records.begin(), records.end());
  }
  std::vector<DatasetRecord> general;
  if (spec.beta < 1.0) {
    if (spec.general_file.empty()) {
      throw EmptyPool("beta < 1 requires a general corpus file");
    }
    general = read_records(spec.general_file);
    for (auto& r : general) {
      r.pool = "general";
      r.provenance.reset();
    }
  }
  if (spec.beta > 0.0 && agentic.empty()) {
    throw EmptyPool("agentic pool is empty but beta > 0");
  }
  if (spec.beta < 1.0 && general.empty()) {
    throw EmptyPool("general pool is empty but beta < 1");
  }

  auto agentic_share = [&](int n) {
    return static_cast<std::size_t>(std::llround(spec.beta * n));
  };
  auto fits = [&](int n) {
    std::size_t a = agentic_share(n);
    std::size_t g = static_cast<std::size_t>(n) - a;
    return a <= agentic.size() && g <= general.size();
  };

  int total;
  bool capped = false;
  if (spec.total) {
    total = *spec.total;
    while (total > 0 && !fits(total)) {
      --total;
      capped = true;
    }
  } else {
    // Largest N the supply sustains at this ratio.
    if (spec.beta == 0.0) {
      total = static_cast<int>(general.size());
    } else {
      total = static_cast<int>(
          std::llround(static_cast<double>(agentic.size()) / spec.beta));
      while (total > 0 && !fits(total)) --total;
    }
  }
  if (total <= 0) throw EmptyPool("no records available for the requested mix");

  const std::size_t n_agentic = agentic_share(total);
  const std::size_t n_general = static_cast<std::size_t>(total) - n_agentic;

  Rng rng(hash64(spec.seed, "dataset-mix"));
  auto sample = [&rng](std::vector<DatasetRecord>& pool, std::size_t n) {
    std::vector<std::size_t> indices(pool.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    rng.shuffle(indices);
    std::vector<DatasetRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[indices[i]]);
    return out;
  };

  std::vector<DatasetRecord> mixed = sample(agentic, n_agentic);
  std::vector<DatasetRecord> general_picks = sample(general, n_general);
  mixed.insert(mixed.end(), general_picks.begin(), general_picks.end());
  rng.shuffle(mixed);
  write_records(out_path, mixed);

  Manifest manifest = count_records(0, spec.beta,
                                    {{std::filesystem::path(out_path).filename().string(), mixed}});
  manifest.agentic_count = n_agentic;
  manifest.general_count = n_general;
  manifest.capped = capped;
  manifest.checksums[std::filesystem::path(out_path).filename().string()] =
      file_checksum_hex(out_path);
  if (count_record_lines(out_path) != mixed.size()) {
    throw Error("emitted mix line count does not match record count");
  }
  return manifest;
}

AuditReport audit_provenance(const std::string& run_dir) {
  namespace fs = std::filesystem;
  AuditReport report;
  std::map<std::string, LoadedTrajectory> cache;

  auto trajectory_for = [&](const Provenance& p) -> const LoadedTrajectory* {
    std::string path = (fs::path(run_dir) / ("round_" + std::to_string(p.round)) /
                        "trajectories" / (p.task_id + ".jsonl"))
                           .string();
    auto it = cache.find(path);
    if (it == cache.end()) {
      if (!fs::exists(path)) return nullptr;
      it = cache.emplace(path, read_trajectory_log(path)).first;
    }
    return &it->second;
  };

  for (const auto& round_dir : fs::directory_iterator(run_dir)) {
    if (!round_dir.is_directory()) continue;
    if (round_dir.path().filename().string().rfind("round_", 0) != 0) continue;
    fs::path datasets = round_dir.path() / "datasets";
    if (!fs::exists(datasets)) continue;
    for (const auto& file : fs::directory_iterator(datasets)) {
      if (file.path().extension() != ".json") continue;
      if (file.path().filename().string().rfind("manifest", 0) == 0) continue;
      for (const auto& record : read_records(file.path().string())) {
        if (record.pool != "correct" && record.pool != "refine" &&
            record.pool != "critique") {
          continue;
        }
        ++report.records_checked;
        if (!record.provenance) {
          ++report.violations;
          report.messages.push_back("record without provenance in " +
                                    file.path().string());
          continue;
        }
        const LoadedTrajectory* loaded = trajectory_for(*record.provenance);
        if (loaded == nullptr) {
          ++report.violations;
          report.messages.push_back("missing trajectory log for task " +
                                    record.provenance->task_id);
          continue;
        }
        if (loaded->aborted || loaded->trajectory.final_reward != 1.0) {
          ++report.violations;
          report.messages.push_back("record for task " + record.provenance->task_id +
                                    " traces to a non-reward-1 trajectory");
          continue;
        }
        if (record.provenance->step >= 0 &&
            record.provenance->step >=
                static_cast<int>(loaded->trajectory.steps.size())) {
          ++report.violations;
          report.messages.push_back("record step out of range for task " +
                                    record.provenance->task_id);
        }
      }
    }
  }
  return report;
}

}  // namespace cgi::forge
