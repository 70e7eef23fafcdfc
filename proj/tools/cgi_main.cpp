#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "cgi/bridge.hpp"
#include "cgi/config.hpp"
#include "cgi/forge.hpp"
#include "cgi/metrics.hpp"
#include "cgi/orchestrator.hpp"
#include "cgi/prompts.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cgi;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void handle_sigint(int) { interrupt_flag().store(true); }

std::string env_or_empty(const char* name) {
  const char* value = std::getenv(name);
  return value == nullptr ? std::string() : std::string(value);
}

// Refuses to reuse a nonempty output directory unless --force was given.
void prepare_out_dir(const std::string& out, bool force) {
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!force) {
      throw Error("output directory " + out + " is not empty (use --force to overwrite)");
    }
    fs::remove_all(out);
  }
  fs::create_directories(out);
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct CommonFlags {
  std::string config_file;
  std::string tasks_file;
  std::string out_dir;
  bool force = false;
  std::optional<std::string> env_type;
  std::optional<std::string> endpoint;
  std::optional<std::string> actor_backend;
  std::optional<std::string> critic;
  std::optional<int> m_candidates;
  std::optional<double> fidelity;
  std::optional<double> temperature;
  std::optional<int> max_steps;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> rounds;
  std::optional<double> beta;
  std::optional<std::string> general;
  std::optional<int> mix_total;
  std::optional<std::string> hook;
  std::optional<double> flip_prob;
  std::optional<bool> expert;
};

void add_common_options(CLI::App* cmd, CommonFlags& flags, bool with_iterate_flags) {
  cmd->add_option("--config", flags.config_file, "configuration file ([section] key = value)");
  cmd->add_option("--tasks", flags.tasks_file, "task set JSON file");
  cmd->add_option("--out", flags.out_dir, "output directory")->required();
  cmd->add_flag("--force", flags.force, "overwrite a nonempty output directory");
  cmd->add_option("--env-type", flags.env_type, "craftsim or bridge");
  cmd->add_option("--endpoint", flags.endpoint, "bridge endpoint (cmd:... or tcp:host:port)");
  cmd->add_option("--backend", flags.actor_backend, "actor backend: scripted or remote");
  cmd->add_option("--critic", flags.critic, "critic: oracle, remote, none/off, or on");
  cmd->add_option("--m", flags.m_candidates, "candidate actions per step (M)");
  cmd->add_option("--fidelity", flags.fidelity, "scripted actor gold-action probability");
  cmd->add_option("--temperature", flags.temperature, "remote sampling temperature");
  cmd->add_option("--max-steps", flags.max_steps, "step limit (0: 4x oracle length)");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--workers", flags.workers, "episode worker limit");
  cmd->add_option("--flip-prob", flags.flip_prob, "degraded-critic grade flip probability");
  cmd->add_option("--expert", flags.expert, "give remote critics the gold-path prompt");
  if (with_iterate_flags) {
    cmd->add_option("--rounds", flags.rounds, "iteration rounds (K)");
    cmd->add_option("--beta", flags.beta, "agentic mix weight");
    cmd->add_option("--general", flags.general, "general corpus file");
    cmd->add_option("--mix-total", flags.mix_total, "mixed dataset target size");
    cmd->add_option("--hook", flags.hook, "trainer hook command template");
  }
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig config;
  if (!flags.config_file.empty()) config = load_config_file(flags.config_file);
  if (!flags.tasks_file.empty()) config.tasks_file = flags.tasks_file;
  if (flags.env_type) config.env_type = *flags.env_type;
  if (flags.endpoint) config.bridge_endpoint = *flags.endpoint;
  if (flags.actor_backend) config.actor_backend = *flags.actor_backend;
  if (flags.critic) {
    std::string kind = *flags.critic;
    if (kind == "off") kind = "none";
    if (kind == "on") kind = config.critic_kind == "none" ? "oracle" : config.critic_kind;
    config.critic_kind = kind;
  }
  if (flags.m_candidates) config.m_candidates = *flags.m_candidates;
  if (flags.fidelity) config.fidelity = *flags.fidelity;
  if (flags.temperature) config.temperature = *flags.temperature;
  if (flags.max_steps) config.max_steps = *flags.max_steps;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.workers) config.workers = *flags.workers;
  if (flags.rounds) config.rounds = *flags.rounds;
  if (flags.beta) config.beta = *flags.beta;
  if (flags.general) config.general_file = *flags.general;
  if (flags.mix_total) config.mix_total = *flags.mix_total;
  if (flags.hook) config.hook_command = *flags.hook;
  if (flags.flip_prob) config.critic_flip_prob = *flags.flip_prob;
  if (flags.expert) config.expert_prompts = *flags.expert;
  return config;
}

// Wires env/actor/critic factories from the resolved config; remote
// backends read ACTOR_* / CRITIC_* environment variables.
Runtime build_runtime(const RunConfig& config) {
  Runtime runtime = make_local_runtime(episode_config(config));

  if (config.env_type == "bridge") {
    std::string endpoint = config.bridge_endpoint;
    runtime.env_factory = [endpoint](const craft::CraftTask&, int) {
      return std::make_unique<bridge::BridgeEnv>(bridge::bridge_connect(endpoint));
    };
  }

  std::shared_ptr<ChatClient> actor_client;
  if (config.actor_backend == "remote") {
    ChatClientConfig client_cfg;
    client_cfg.endpoint = env_or_empty("ACTOR_ENDPOINT");
    client_cfg.api_key = env_or_empty("ACTOR_KEY");
    client_cfg.model = config.actor_model;
    client_cfg.max_inflight = config.max_inflight;
    if (client_cfg.endpoint.empty()) {
      throw Error("remote actor requires ACTOR_ENDPOINT");
    }
    actor_client = std::make_shared<ChatClient>(client_cfg);
    ActorConfig actor_cfg = runtime.cfg.actor;
    runtime.actor_factory = [actor_cfg, actor_client](const craft::CraftTask&,
                                                      std::uint64_t) {
      return std::make_unique<RemoteActor>(actor_cfg, actor_client);
    };
    runtime.apply_actor_endpoint = [actor_client](const std::string& endpoint) {
      actor_client->set_endpoint(endpoint);
    };
  }

  if (config.critic_kind == "remote") {
    ChatClientConfig client_cfg;
    client_cfg.endpoint = env_or_empty("CRITIC_ENDPOINT");
    client_cfg.api_key = env_or_empty("CRITIC_KEY");
    client_cfg.model = config.critic_model;
    client_cfg.max_inflight = config.max_inflight;
    if (client_cfg.endpoint.empty()) {
      throw Error("remote critic requires CRITIC_ENDPOINT");
    }
    auto critic_client = std::make_shared<ChatClient>(client_cfg);
    runtime.critic_factory = [critic_client](const craft::CraftTask&,
                                             std::uint64_t) -> std::unique_ptr<Critic> {
      return std::make_unique<RemoteCritic>(critic_client);
    };
  }
  return runtime;
}

std::map<std::string, int> oracle_lengths_of(const std::vector<craft::CraftTask>& tasks) {
  std::map<std::string, int> out;
  for (const auto& task : tasks) {
    if (task.instruction.oracle_length) {
      out[task.instruction.task_id] = *task.instruction.oracle_length;
    }
  }
  return out;
}

int cmd_gen_tasks(int depth, int branching, int count, std::uint64_t seed,
                  const std::string& out, bool force) {
  if (depth < 1 || branching < 1 || count < 1) {
    std::cerr << "gen-tasks: depth, branching, and count must be >= 1\n";
    return kExitUsage;
  }
  if (fs::exists(out) && !force) {
    std::cerr << "gen-tasks: " << out << " exists (use --force to overwrite)\n";
    return kExitUsage;
  }
  auto tasks = craft::generate_tasks({depth, branching, count, seed});
  craft::write_task_file(out, tasks);
  std::cout << "wrote " << tasks.size() << " tasks to " << out << "\n";
  return kExitOk;
}

int cmd_run(const CommonFlags& flags, bool collect_critiques) {
  RunConfig config = resolve_config(flags);
  Runtime runtime;
  try {
    validate_config(config, false);
    if (collect_critiques && config.critic_kind == "none") {
      throw Error("collect-critiques requires an oracle or remote critic");
    }
    runtime = build_runtime(config);  // misconfigured backends surface here
    prepare_out_dir(flags.out_dir, flags.force);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  auto tasks = craft::read_task_file(config.tasks_file);
  write_json_file(fs::path(flags.out_dir) / "config_snapshot.json", config.to_json());

  fs::path round_dir = fs::path(flags.out_dir) / "round_0";
  RoundHarvest harvest =
      run_exploration(runtime, 0, tasks, (round_dir / "trajectories").string());
  write_json_file(round_dir / "harvest_stats.json", harvest.stats.to_json());

  std::map<std::string, int> aborted_by_env;
  if (harvest.stats.n_aborted > 0 && !tasks.empty()) {
    aborted_by_env[tasks.front().instruction.env_id] = harvest.stats.n_aborted;
  }
  metrics::MetricsReport report = metrics::build_report(
      harvest.trajectories, aborted_by_env, 0, 1, oracle_lengths_of(tasks));
  write_json_file(fs::path(flags.out_dir) / "report.json", report.to_json());
  metrics::write_figures((fs::path(flags.out_dir) / "figures").string(), report);

  if (collect_critiques) {
    fs::path data_dir = round_dir / "datasets";
    fs::create_directories(data_dir);
    auto records = forge::build_critique_records(runtime.prompts, harvest.d_refine,
                                                 fs::path(flags.out_dir).filename().string());
    forge::write_records((data_dir / "critique.json").string(), records);
    forge::Manifest manifest =
        forge::count_records(0, std::nullopt, {{"critique.json", records}});
    manifest.checksums["critique.json"] =
        forge::file_checksum_hex((data_dir / "critique.json").string());
    manifest.file_records["critique.json"] = records.size();
    write_json_file(data_dir / "manifest_round0.json", manifest.to_json());
    std::cout << "critique records: " << records.size() << "\n";
  }

  std::cout << "episodes: " << harvest.stats.n_completed
            << "  aborted: " << harvest.stats.n_aborted
            << "  success_rate: " << metrics::format_double(harvest.stats.success_rate)
            << "  avg_final_score: "
            << metrics::format_double(harvest.stats.avg_final_score) << "\n";

  if (!tasks.empty() && harvest.stats.n_completed == 0) {
    std::cerr << "error: every episode aborted\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_iterate(const CommonFlags& flags) {
  RunConfig config = resolve_config(flags);
  Runtime runtime;
  try {
    validate_config(config, true);
    runtime = build_runtime(config);
    prepare_out_dir(flags.out_dir, flags.force);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  auto tasks = craft::read_task_file(config.tasks_file);
  write_json_file(fs::path(flags.out_dir) / "config_snapshot.json", config.to_json());

  IterateOptions options;
  options.rounds = config.rounds;
  options.beta = config.beta.value();
  options.general_file = config.general_file;
  options.mix_total = config.mix_total;
  options.hook_command = config.hook_command;
  options.out_dir = flags.out_dir;
  options.run_id = fs::path(flags.out_dir).filename().string();

  try {
    auto summaries = run_iterations(runtime, tasks, options);
    std::cout << "round  success_rate  correct  refine  aborted\n";
    for (const auto& s : summaries) {
      std::cout << s.round << "      " << metrics::format_double(s.stats.success_rate)
                << "          " << s.stats.n_correct << "       "
                << s.stats.n_refine_entries << "      " << s.stats.n_aborted << "\n";
    }
  } catch (const HookFailed& e) {
    std::cerr << "error: " << e.what() << " (completed rounds retained)\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_mix(double beta, const std::vector<std::string>& agentic,
            const std::string& general, std::optional<int> total, std::uint64_t seed,
            const std::string& out, bool force) {
  for (const auto& file : agentic) {
    if (!fs::exists(file)) {
      std::cerr << "mix: agentic file does not exist: " << file << "\n";
      return kExitUsage;
    }
  }
  if (!general.empty() && !fs::exists(general)) {
    std::cerr << "mix: general file does not exist: " << general << "\n";
    return kExitUsage;
  }
  if (fs::exists(out) && !force) {
    std::cerr << "mix: " << out << " exists (use --force to overwrite)\n";
    return kExitUsage;
  }
  forge::MixSpec spec;
  spec.beta = beta;
  spec.agentic_files = agentic;
  spec.general_file = general;
  spec.total = total;
  spec.seed = seed;
  try {
    forge::Manifest manifest = forge::mix_datasets(spec, out);
    write_json_file(out + ".manifest.json", manifest.to_json());
    if (manifest.capped) {
      std::cerr << "warning: requested total exceeds the pool supply; capped to "
                << manifest.agentic_count + manifest.general_count << " records\n";
    }
    std::cout << "mixed " << manifest.agentic_count << " agentic + "
              << manifest.general_count << " general records into " << out << "\n";
  } catch (const EmptyPool& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_eval(const std::vector<std::string>& run_dirs, const std::string& tasks_file,
             const std::string& out, bool force) {
  for (const auto& dir : run_dirs) {
    if (!fs::exists(dir)) {
      std::cerr << "eval: run directory does not exist: " << dir << "\n";
      return kExitUsage;
    }
  }
  try {
    prepare_out_dir(out, force);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::map<std::string, int> oracle_lengths;
  if (!tasks_file.empty()) {
    oracle_lengths = oracle_lengths_of(craft::read_task_file(tasks_file));
  }
  std::vector<Trajectory> trajectories;
  std::map<std::string, int> aborted_by_env;
  int aborted = 0;
  int corrupt = 0;
  nlohmann::json per_run = nlohmann::json::array();
  for (const auto& dir : run_dirs) {
    metrics::LoadedRun run = metrics::load_run_dir(dir);
    metrics::MetricsReport own = metrics::build_report(
        run.trajectories, run.aborted_by_env, run.corrupt, 1, oracle_lengths);
    per_run.push_back({{"run", dir}, {"report", own.to_json()}});
    trajectories.insert(trajectories.end(), run.trajectories.begin(),
                        run.trajectories.end());
    for (const auto& [env, n] : run.aborted_by_env) aborted_by_env[env] += n;
    aborted += run.aborted();
    corrupt += run.corrupt;
  }
  metrics::MetricsReport report = metrics::build_report(trajectories, aborted_by_env,
                                                        corrupt,
                                                        static_cast<int>(run_dirs.size()),
                                                        oracle_lengths);
  nlohmann::json report_json = report.to_json();
  report_json["runs"] = per_run;
  write_json_file(fs::path(out) / "report.json", report_json);
  metrics::write_figures((fs::path(out) / "figures").string(), report);
  std::cout << "evaluated " << trajectories.size() << " episodes (" << aborted
            << " aborted, " << corrupt << " corrupt)\n";
  return kExitOk;
}

int cmd_serve_env(const std::string& tasks_file, bool stdio, const std::string& tcp,
                  int max_steps, int sessions) {
  auto tasks = craft::read_task_file(tasks_file);
  craft::CraftConfig cfg;
  cfg.max_steps = max_steps;
  if (stdio) {
    bridge::FdTransport transport(0, 1, /*owns_fds=*/false);
    bridge::serve_env(transport, tasks, cfg);
    return kExitOk;
  }
  std::size_t colon = tcp.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "serve-env: --tcp wants host:port\n";
    return kExitUsage;
  }
  bridge::serve_env_tcp(tcp.substr(0, colon), std::stoi(tcp.substr(colon + 1)), tasks,
                        cfg, sessions);
  return kExitOk;
}

int cmd_dump_prompts(const std::string& out) {
  fs::create_directories(fs::path(out) / "critique");
  PromptRegistry registry = PromptRegistry::builtin();
  for (const std::string env : {"craftsim", "textcraft", "webshop", "scienceworld"}) {
    std::ofstream file(fs::path(out) / (env + ".txt"), std::ios::trunc | std::ios::binary);
    file << registry.system_prompt(env);
  }
  std::ofstream plain(fs::path(out) / "critique" / "plain.txt",
                      std::ios::trunc | std::ios::binary);
  plain << critique_template_plain();
  std::ofstream gold(fs::path(out) / "critique" / "gold.txt",
                     std::ios::trunc | std::ios::binary);
  gold << critique_template_gold();
  std::cout << "wrote prompt assets to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, handle_sigint);

  CLI::App app{"critique-guided improvement harness for text environments"};
  app.require_subcommand(1);

  // gen-tasks
  int depth = 1, branching = 1, count = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  bool gen_force = false;
  auto* gen = app.add_subcommand("gen-tasks", "generate crafting tasks with gold paths");
  gen->add_option("--depth", depth, "longest recipe chain")->required();
  gen->add_option("--branching", branching, "max recipe inputs");
  gen->add_option("--count", count, "number of tasks")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output task file")->required();
  gen->add_flag("--force", gen_force, "overwrite an existing file");

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "run one evaluation round");
  add_common_options(run, run_flags, false);

  CommonFlags collect_flags;
  auto* collect =
      app.add_subcommand("collect-critiques", "harvest expert critiques into a dataset");
  add_common_options(collect, collect_flags, false);

  CommonFlags iterate_flags;
  auto* iterate = app.add_subcommand("iterate", "exploration + dataset emission, K rounds");
  add_common_options(iterate, iterate_flags, true);

  double mix_beta = 0.8;
  std::vector<std::string> mix_agentic;
  std::string mix_general, mix_out;
  std::optional<int> mix_n;
  std::uint64_t mix_seed = 0;
  bool mix_force = false;
  auto* mix = app.add_subcommand("mix", "mix agentic and general datasets");
  mix->add_option("--beta", mix_beta, "agentic weight")->required();
  mix->add_option("--agentic", mix_agentic, "agentic dataset files")->required();
  mix->add_option("--general", mix_general, "general corpus file");
  mix->add_option("--n", mix_n, "total mixed records");
  mix->add_option("--seed", mix_seed, "sampling seed");
  mix->add_option("--out", mix_out, "output file")->required();
  mix->add_flag("--force", mix_force, "overwrite an existing file");

  std::vector<std::string> eval_dirs;
  std::string eval_tasks, eval_out;
  bool eval_force = false;
  auto* eval = app.add_subcommand("eval", "aggregate metrics from run directories");
  eval->add_option("runs", eval_dirs, "run directories")->required();
  eval->add_option("--tasks", eval_tasks, "task file for difficulty buckets");
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_flag("--force", eval_force, "overwrite a nonempty output directory");

  std::string serve_tasks, serve_tcp;
  bool serve_stdio = false;
  int serve_max_steps = 0, serve_sessions = 0;
  auto* serve = app.add_subcommand("serve-env", "serve the crafting env over the bridge protocol");
  serve->add_option("--tasks", serve_tasks, "task set file")->required();
  serve->add_flag("--stdio", serve_stdio, "serve one session on stdin/stdout");
  serve->add_option("--tcp", serve_tcp, "listen on host:port");
  serve->add_option("--max-steps", serve_max_steps, "episode step limit (0: default)");
  serve->add_option("--sessions", serve_sessions, "stop after N sessions (tcp only)");

  std::string prompts_out;
  auto* dump = app.add_subcommand("dump-prompts", "write the prompt assets to a directory");
  dump->add_option("--out", prompts_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_tasks(depth, branching, count, gen_seed, gen_out, gen_force);
    }
    if (run->parsed()) return cmd_run(run_flags, false);
    if (collect->parsed()) return cmd_run(collect_flags, true);
    if (iterate->parsed()) return cmd_iterate(iterate_flags);
    if (mix->parsed()) {
      return cmd_mix(mix_beta, mix_agentic, mix_general, mix_n, mix_seed, mix_out,
                     mix_force);
    }
    if (eval->parsed()) return cmd_eval(eval_dirs, eval_tasks, eval_out, eval_force);
    if (serve->parsed()) {
      if (!serve_stdio && serve_tcp.empty()) {
        std::cerr << "serve-env: pass --stdio or --tcp host:port\n";
        return kExitUsage;
      }
      return cmd_serve_env(serve_tasks, serve_stdio, serve_tcp, serve_max_steps,
                           serve_sessions);
    }
    if (dump->parsed()) return cmd_dump_prompts(prompts_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
