#include "cgi/config.hpp"

#include <filesystem>
#include <fstream>

namespace cgi {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

bool parse_bool(const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw Error("not a boolean: " + value);
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  return nlohmann::json{
      {"env",
       {{"type", env_type},
        {"tasks", tasks_file},
        {"endpoint", bridge_endpoint},
        {"max_steps", max_steps}}},
      {"actor",
       {{"backend", actor_backend},
        {"m", m_candidates},
        {"temperature", temperature},
        {"fidelity", fidelity},
        {"model", actor_model},
        {"max_inflight", max_inflight}}},
      {"critic",
       {{"kind", critic_kind},
        {"expert", expert_prompts},
        {"flip_prob", critic_flip_prob},
        {"model", critic_model}}},
      {"run",
       {{"seed", seed},
        {"workers", workers},
        {"rounds", rounds},
        {"beta", beta ? nlohmann::json(*beta) : nlohmann::json(nullptr)},
        {"general", general_file},
        {"mix_total", mix_total ? nlohmann::json(*mix_total) : nlohmann::json(nullptr)},
        {"hook", hook_command},
        {"critique_per_step", critique_per_step}}}};
}

void apply_config_entry(RunConfig& config, const std::string& section,
                        const std::string& key, const std::string& value) {
  const std::string path = section + "." + key;
  if (path == "env.type") {
    config.env_type = value;
  } else if (path == "env.tasks") {
    config.tasks_file = value;
  } else if (path == "env.endpoint") {
    config.bridge_endpoint = value;
  } else if (path == "env.max_steps") {
    config.max_steps = std::stoi(value);
  } else if (path == "actor.backend") {
    config.actor_backend = value;
  } else if (path == "actor.m") {
    config.m_candidates = std::stoi(value);
  } else if (path == "actor.temperature") {
    config.temperature = std::stod(value);
  } else if (path == "actor.fidelity") {
    config.fidelity = std::stod(value);
  } else if (path == "actor.model") {
    config.actor_model = value;
  } else if (path == "actor.max_inflight") {
    config.max_inflight = std::stoi(value);
  } else if (path == "critic.kind") {
    config.critic_kind = value;
  } else if (path == "critic.expert") {
    config.expert_prompts = parse_bool(value);
  } else if (path == "critic.flip_prob") {
    config.critic_flip_prob = std::stod(value);
  } else if (path == "critic.model") {
    config.critic_model = value;
  } else if (path == "run.seed") {
    config.seed = std::stoull(value);
  } else if (path == "run.workers") {
    config.workers = std::stoi(value);
  } else if (path == "run.rounds") {
    config.rounds = std::stoi(value);
  } else if (path == "run.beta") {
    config.beta = std::stod(value);
  } else if (path == "run.general") {
    config.general_file = value;
  } else if (path == "run.mix_total") {
    config.mix_total = std::stoi(value);
  } else if (path == "run.hook") {
    config.hook_command = value;
  } else if (path == "run.critique_per_step") {
    config.critique_per_step = parse_bool(value);
  } else {
    throw Error("unknown config key: [" + section + "] " + key);
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  RunConfig config;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (text.front() == '[') {
      if (text.back() != ']') {
        throw Error(path + ":" + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(text.substr(1, text.size() - 2));
      continue;
    }
    std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw Error(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(text.substr(0, eq));
    std::string value = unquote(trim(text.substr(eq + 1)));
    try {
      apply_config_entry(config, section, key, value);
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

EpisodeConfig episode_config(const RunConfig& config) {
  EpisodeConfig cfg;
  cfg.actor.backend = config.actor_backend == "remote" ? ActorConfig::Backend::Remote
                                                       : ActorConfig::Backend::Scripted;
  cfg.actor.m_candidates = config.m_candidates;
  cfg.actor.temperature = config.temperature;
  cfg.actor.fidelity = config.fidelity;
  if (config.critic_kind == "oracle") {
    cfg.critic = CriticKind::Oracle;
  } else if (config.critic_kind == "remote") {
    cfg.critic = CriticKind::Remote;
  } else {
    cfg.critic = CriticKind::None;
  }
  cfg.expert_prompts = config.expert_prompts;
  cfg.critic_flip_prob = config.critic_flip_prob;
  cfg.max_steps = config.max_steps;
  cfg.master_seed = config.seed;
  cfg.critique_per_step = config.critique_per_step;
  cfg.workers = config.workers;
  return cfg;
}

void validate_config(const RunConfig& config, bool for_iterate) {
  if (config.m_candidates < 1) throw Error("actor.m must be >= 1");
  if (config.rounds < 1) throw Error("run.rounds must be >= 1");
  if (config.workers < 1) throw Error("run.workers must be >= 1");
  if (config.fidelity < 0.0 || config.fidelity > 1.0) {
    throw Error("actor.fidelity must be in [0,1]");
  }
  if (config.env_type != "craftsim" && config.env_type != "bridge") {
    throw Error("env.type must be craftsim or bridge");
  }
  if (config.actor_backend != "scripted" && config.actor_backend != "remote") {
    throw Error("actor.backend must be scripted or remote");
  }
  if (config.critic_kind != "oracle" && config.critic_kind != "remote" &&
      config.critic_kind != "none") {
    throw Error("critic.kind must be oracle, remote, or none");
  }
  if (config.tasks_file.empty()) throw Error("env.tasks is required");
  if (!std::filesystem::exists(config.tasks_file)) {
    throw Error("tasks file does not exist: " + config.tasks_file);
  }
  if (config.env_type == "bridge" && config.bridge_endpoint.empty()) {
    throw Error("env.endpoint is required for bridge environments");
  }
  if (for_iterate) {
    if (!config.beta) throw Error("run.beta must be set explicitly for iteration");
    if (*config.beta < 0.0 || *config.beta > 1.0) throw Error("run.beta must be in [0,1]");
    if (*config.beta < 1.0) {
      if (config.general_file.empty()) {
        throw Error("run.general is required when beta < 1");
      }
      if (!std::filesystem::exists(config.general_file)) {
        throw Error("general corpus file does not exist: " + config.general_file);
      }
    }
  }
}

}  // namespace cgi
