#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cgi/chat.hpp"
#include "cgi/orchestrator.hpp"
#include "cgi/prompts.hpp"

namespace cgi::forge {

struct Provenance {
  std::string run_id;
  int round = 0;
  std::string task_id;
  int step = -1;  // -1: whole-trajectory record
  std::string env_id;

  bool operator==(const Provenance&) const = default;
};

// One SFT conversation: human/gpt turns (human first, gpt last), an
// optional system text, the source pool, and provenance for the audit
// trail (absent for general-corpus records).
struct DatasetRecord {
  std::string system;
  ChatTurns conversations;  // roles Human and Assistant only
  std::string pool;         // critique|correct|refine|general|expert
  std::optional<Provenance> provenance;

  bool operator==(const DatasetRecord&) const = default;
};

nlohmann::json record_to_json(const DatasetRecord& record);
DatasetRecord record_from_json(const nlohmann::json& j);

// Exact bytes of the conversation payload; the dedup key material.
std::string conversation_bytes(const DatasetRecord& record);

// Throws Error when a record does not match the emission schema:
// nonempty conversations of {"from": human|gpt, "value"}, alternating
// human-first and ending with gpt, plus a "system" string.
void validate_record_json(const nlohmann::json& j);

// Dataset files are JSON arrays with exactly one record per line, so
// record counts are auditable with a line scan.
void write_records(const std::string& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_records(const std::string& path);
std::size_t count_record_lines(const std::string& path);

std::string file_checksum_hex(const std::string& path);  // fnv1a-64

// --- Pool builders. Every builder rejects inputs whose parent trajectory
// --- reward is not exactly 1 (RewardFilterViolation).

// One record per (candidate, critique) pair; the human turn is the plain
// critique prompt (the gold path never reaches a training input).
std::vector<DatasetRecord> build_critique_records(const PromptRegistry& prompts,
                                                  const std::vector<RefineEntry>& entries,
                                                  const std::string& run_id);

// One multi-turn record per reward-1 trajectory; critiques do not appear.
std::vector<DatasetRecord> build_correct_records(const PromptRegistry& prompts,
                                                 const std::vector<Trajectory>& trajectories,
                                                 const std::string& run_id);

// One record per harvested step: history + candidates + critiques ->
// refined action.
std::vector<DatasetRecord> build_refine_records(const PromptRegistry& prompts,
                                                const std::vector<RefineEntry>& entries,
                                                const std::string& run_id,
                                                bool include_unrevised = true);

// Gold-path replays through the environment, pool "expert".
std::vector<DatasetRecord> build_expert_records(const PromptRegistry& prompts,
                                                const std::vector<craft::CraftTask>& tasks,
                                                const std::string& run_id);

// Concatenation deduplicated by (task_id, conversation bytes); expert
// records win collisions.
std::vector<DatasetRecord> union_train(const std::vector<DatasetRecord>& expert,
                                       const std::vector<DatasetRecord>& correct);

struct MixSpec {
  double beta = 0.8;  // agentic weight
  std::vector<std::string> agentic_files;
  std::string general_file;  // unused when beta == 1
  std::optional<int> total;
  std::uint64_t seed = 0;
};

struct Manifest {
  int round = 0;
  std::optional<double> beta;
  std::map<std::string, std::map<std::string, std::size_t>> counts;  // env -> pool -> n
  std::map<std::string, std::size_t> file_records;                   // file -> records
  std::map<std::string, std::string> checksums;                      // file -> fnv hex
  std::size_t agentic_count = 0;
  std::size_t general_count = 0;
  bool capped = false;  // requested total exceeded the supply

  nlohmann::json to_json() const;
};

Manifest count_records(int round, std::optional<double> beta,
                       const std::map<std::string, std::vector<DatasetRecord>>& files_by_name);

// Emits round(beta*N) agentic and N - round(beta*N) general records,
// sampled without replacement and shuffled, all derived from the seed.
// Throws EmptyPool when a pool with nonzero weight is empty.
Manifest mix_datasets(const MixSpec& spec, const std::string& out_path);

struct AuditReport {
  int records_checked = 0;
  int violations = 0;
  std::vector<std::string> messages;
};

// Verifies that every correct/refine/critique record in a run directory
// traces to a trajectory log with final_reward exactly 1.
AuditReport audit_provenance(const std::string& run_dir);

}  // namespace cgi::forge
