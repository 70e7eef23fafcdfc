#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cgi/forge.hpp"
#include "cgi/orchestrator.hpp"

namespace cgi {
namespace {

namespace fs = std::filesystem;

std::string fill_hook_command(const std::string& tmpl, const std::string& mixed_path,
                              int round) {
  std::string out = tmpl;
  auto replace_all = [&out](const std::string& token, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = out.find(token, pos)) != std::string::npos) {
      out.replace(pos, token.size(), value);
      pos += value.size();
    }
  };
  replace_all("{mixed_dataset}", mixed_path);
  replace_all("{round}", std::to_string(round));
  return out;
}

struct HookResult {
  int exit_code = -1;
  std::string stdout_text;
};

HookResult run_hook_command(const std::string& command) {
  HookResult result;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (pipe == nullptr) return result;
  char chunk[4096];
  while (std::fgets(chunk, sizeof(chunk), pipe) != nullptr) {
    result.stdout_text += chunk;
  }
  int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string last_nonempty_line(const std::string& text) {
  std::string last;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    std::string line = text.substr(start, end == std::string::npos ? std::string::npos
                                                                   : end - start);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) last = line;
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return last;
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

std::vector<RoundSummary> run_iterations(Runtime& runtime,
                                         const std::vector<craft::CraftTask>& tasks,
                                         const IterateOptions& options) {
  if (options.rounds < 1) throw Error("iteration count must be >= 1");
  if (options.beta < 0.0 || options.beta > 1.0) throw Error("beta must be in [0,1]");
  if (options.beta < 1.0 && options.general_file.empty()) {
    throw EmptyPool("beta < 1 requires a general corpus file");
  }
  fs::create_directories(options.out_dir);

  const auto expert =
      forge::build_expert_records(runtime.prompts, tasks, options.run_id);
  std::vector<forge::DatasetRecord> correct_cum;
  std::vector<RoundSummary> summaries;
  nlohmann::json round_table = nlohmann::json::array();

  for (int k = 1; k <= options.rounds; ++k) {
    fs::path round_dir = fs::path(options.out_dir) / ("round_" + std::to_string(k));
    fs::path traj_dir = round_dir / "trajectories";
    fs::path data_dir = round_dir / "datasets";
    fs::create_directories(traj_dir);
    fs::create_directories(data_dir);

    RoundHarvest harvest = run_exploration(runtime, k, tasks, traj_dir.string());
    write_json_file(round_dir / "harvest_stats.json", harvest.stats.to_json());

    auto correct_k =
        forge::build_correct_records(runtime.prompts, harvest.d_correct, options.run_id);
    auto refine_k =
        forge::build_refine_records(runtime.prompts, harvest.d_refine, options.run_id);
    correct_cum.insert(correct_cum.end(), correct_k.begin(), correct_k.end());
    auto train_k = forge::union_train(expert, correct_cum);

    std::map<std::string, std::vector<forge::DatasetRecord>> files;
    files["expert.json"] = expert;
    files["correct.json"] = std::move(correct_k);
    files["refine.json"] = refine_k;
    files["train.json"] = std::move(train_k);
    if (options.emit_critiques) {
      files["critique.json"] = forge::build_critique_records(
          runtime.prompts, harvest.d_refine, options.run_id);
    }
    for (const auto& [name, records] : files) {
      forge::write_records((data_dir / name).string(), records);
    }

    forge::MixSpec mix;
    mix.beta = options.beta;
    mix.agentic_files = {(data_dir / "train.json").string(),
                         (data_dir / "refine.json").string()};
    mix.general_file = options.general_file;
    mix.total = options.mix_total;
    mix.seed = hash64(runtime.cfg.master_seed, static_cast<std::uint64_t>(k));
    std::string mixed_name = "mixed_round" + std::to_string(k) + ".json";
    fs::path mixed_path = data_dir / mixed_name;
    forge::Manifest manifest = forge::mix_datasets(mix, mixed_path.string());

    manifest.round = k;
    for (const auto& [name, records] : files) {
      forge::Manifest file_counts = forge::count_records(k, options.beta, {{name, records}});
      for (const auto& [env, pools] : file_counts.counts) {
        for (const auto& [pool, n] : pools) manifest.counts[env][pool] += n;
      }
      manifest.file_records[name] = records.size();
      manifest.checksums[name] = forge::file_checksum_hex((data_dir / name).string());
      if (forge::count_record_lines((data_dir / name).string()) != records.size()) {
        throw Error("record line count mismatch for " + name);
      }
    }
    fs::path manifest_path = data_dir / ("manifest_round" + std::to_string(k) + ".json");
    write_json_file(manifest_path, manifest.to_json());

    RoundSummary summary;
    summary.round = k;
    summary.stats = harvest.stats;
    for (const auto& [name, records] : files) {
      summary.pool_counts[name.substr(0, name.find('.'))] = records.size();
    }
    summary.manifest_path = manifest_path.string();
    summary.mixed_path = mixed_path.string();

    round_table.push_back({{"round", k},
                           {"success_rate", harvest.stats.success_rate},
                           {"avg_final_score", harvest.stats.avg_final_score},
                           {"n_correct", harvest.stats.n_correct},
                           {"n_aborted", harvest.stats.n_aborted}});
    write_json_file(fs::path(options.out_dir) / "summary.json", round_table);

    if (!options.hook_command.empty()) {
      std::string command = fill_hook_command(options.hook_command, mixed_path.string(), k);
      HookResult hook = run_hook_command(command);
      if (hook.exit_code != 0) {
        summaries.push_back(std::move(summary));
        throw HookFailed("trainer hook failed (exit " + std::to_string(hook.exit_code) +
                         ") for round " + std::to_string(k));
      }
      summary.actor_endpoint = last_nonempty_line(hook.stdout_text);
      if (!summary.actor_endpoint.empty() && runtime.apply_actor_endpoint) {
        runtime.apply_actor_endpoint(summary.actor_endpoint);
      }
    }
    summaries.push_back(std::move(summary));
  }
  return summaries;
}

}  // namespace cgi
