#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cgi/trajectory.hpp"

namespace cgi::metrics {

double avg_final_score(const std::vector<Trajectory>& trajectories);  // NoEpisodes if empty

// Fraction with final_reward exactly 1.
double success_rate(const std::vector<Trajectory>& trajectories);

// Stage of step t (0-based) in a length-len trajectory: ceil(5*(t+1)/len),
// clamped to [1,5].
int stage_of(int t, int len);

struct StageCounts {
  int revised = 0;
  int total = 0;
  std::optional<double> ratio() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(revised) / total;
  }
};

// A step counts as revised when the executed command differs from
// candidate 0 after normalization. Requires candidate buffers
// (MissingCandidates otherwise).
std::array<StageCounts, 5> revision_ratio(const std::vector<Trajectory>& trajectories);

struct DifficultyBucket {
  int n_tasks = 0;
  int n_episodes = 0;
  std::optional<double> avg_score;
};

// Tercile split of tasks by oracle length (ties to the lower bucket);
// per-bucket average final score over the given trajectories.
std::array<DifficultyBucket, 3> difficulty_buckets(
    const std::map<std::string, int>& oracle_lengths,
    const std::vector<Trajectory>& trajectories);

std::vector<std::pair<int, double>> cumulative_series(const Trajectory& trajectory);

struct EnvMetrics {
  int n_episodes = 0;
  int aborted = 0;
  int corrupt = 0;
  double avg_final_score = 0.0;
  double success_rate = 0.0;
  std::array<StageCounts, 5> stages{};
  std::array<DifficultyBucket, 3> buckets{};
  bool has_buckets = false;
  std::vector<std::pair<std::string, std::vector<std::pair<int, double>>>> series;
};

struct MetricsReport {
  std::map<std::string, EnvMetrics> envs;
  int n_runs = 0;

  nlohmann::json to_json() const;
};

// Aggregates loaded trajectories (plus abort/corrupt tallies) into a
// report; oracle lengths enable the difficulty breakdown.
MetricsReport build_report(const std::vector<Trajectory>& trajectories,
                           const std::map<std::string, int>& aborted_by_env, int corrupt,
                           int n_runs, const std::map<std::string, int>& oracle_lengths);

// Reads every runs-directory trajectory log under dir/round_*/trajectories.
struct LoadedRun {
  std::vector<Trajectory> trajectories;
  std::map<std::string, int> aborted_by_env;  // aborted logs keep a readable header
  int corrupt = 0;
  int aborted() const {
    int n = 0;
    for (const auto& [env, count] : aborted_by_env) n += count;
    return n;
  }
};
LoadedRun load_run_dir(const std::string& dir);

// Plot-ready CSV plus a self-contained SVG per figure.
void write_figures(const std::string& dir, const MetricsReport& report);

std::string format_double(double v);

}  // namespace cgi::metrics
