#include "cgi/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cgi/craftsim.hpp"

namespace cgi::metrics {
namespace {

namespace fs = std::filesystem;

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "0";
  return std::string(buf, ptr);
}

double avg_final_score(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw NoEpisodes("no episodes to average");
  double sum = 0.0;
  for (const auto& t : trajectories) sum += t.final_reward;
  return sum / static_cast<double>(trajectories.size());
}

double success_rate(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw NoEpisodes("no episodes for success rate");
  int n = 0;
  for (const auto& t : trajectories) {
    if (t.final_reward == 1.0) ++n;
  }
  return static_cast<double>(n) / static_cast<double>(trajectories.size());
}

int stage_of(int t, int len) {
  if (len <= 0) return 1;
  int stage = (5 * (t + 1) + len - 1) / len;  // ceil(5*(t+1)/len)
  return std::clamp(stage, 1, 5);
}

std::array<StageCounts, 5> revision_ratio(const std::vector<Trajectory>& trajectories) {
  std::array<StageCounts, 5> stages{};
  for (const auto& traj : trajectories) {
    const int len = static_cast<int>(traj.steps.size());
    for (int t = 0; t < len; ++t) {
      const Step& step = traj.steps[static_cast<std::size_t>(t)];
      if (step.candidates.candidates.empty()) {
        throw MissingCandidates("trajectory " + traj.instruction.task_id +
                                " lacks candidate buffers at step " + std::to_string(t));
      }
      const bool revised = !craft::commands_equal(
          step.refined_action.command, step.candidates.candidates.front().command);
      StageCounts& bucket = stages[static_cast<std::size_t>(stage_of(t, len) - 1)];
      bucket.total += 1;
      if (revised) bucket.revised += 1;
    }
  }
  return stages;
}

std::array<DifficultyBucket, 3> difficulty_buckets(
    const std::map<std::string, int>& oracle_lengths,
    const std::vector<Trajectory>& trajectories) {
  if (oracle_lengths.empty()) throw MissingOracleLength("no oracle lengths provided");
  std::vector<int> lengths;
  lengths.reserve(oracle_lengths.size());
  for (const auto& [task, len] : oracle_lengths) lengths.push_back(len);
  std::sort(lengths.begin(), lengths.end());
  const std::size_t n = lengths.size();
  auto threshold = [&](std::size_t numerator) {
    std::size_t idx = (numerator + 2) / 3;  // ceil(numerator/3)
    return lengths[std::min(n - 1, idx == 0 ? 0 : idx - 1)];
  };
  const int t1 = threshold(n);
  const int t2 = threshold(2 * n);

  auto bucket_of = [&](int len) {
    if (len <= t1) return 0;
    if (len <= t2) return 1;
    return 2;
  };

  std::array<DifficultyBucket, 3> buckets{};
  for (const auto& [task, len] : oracle_lengths) {
    buckets[static_cast<std::size_t>(bucket_of(len))].n_tasks += 1;
  }
  std::array<double, 3> sums{};
  for (const auto& traj : trajectories) {
    auto it = oracle_lengths.find(traj.instruction.task_id);
    if (it == oracle_lengths.end()) {
      throw MissingOracleLength("no oracle length for task " + traj.instruction.task_id);
    }
    auto& bucket = buckets[static_cast<std::size_t>(bucket_of(it->second))];
    bucket.n_episodes += 1;
    sums[static_cast<std::size_t>(bucket_of(it->second))] += traj.final_reward;
  }
  for (std::size_t b = 0; b < 3; ++b) {
    if (buckets[b].n_episodes > 0) {
      buckets[b].avg_score = sums[b] / buckets[b].n_episodes;
    }
  }
  return buckets;
}

std::vector<std::pair<int, double>> cumulative_series(const Trajectory& trajectory) {
  if (trajectory.steps.empty()) throw EmptyTrajectory("trajectory has no steps");
  std::vector<std::pair<int, double>> out;
  out.reserve(trajectory.steps.size());
  for (const auto& step : trajectory.steps) {
    out.emplace_back(step.index, step.observation.score);
  }
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json envs_json = nlohmann::json::object();
  for (const auto& [env, m] : envs) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : m.stages) {
      auto r = s.ratio();
      stages.push_back(nlohmann::json{{"revised", s.revised},
                                      {"total", s.total},
                                      {"ratio", r ? nlohmann::json(*r) : nlohmann::json(nullptr)}});
    }
    nlohmann::json buckets = nlohmann::json::array();
    if (m.has_buckets) {
      for (const auto& b : m.buckets) {
        buckets.push_back(nlohmann::json{
            {"n_tasks", b.n_tasks},
            {"n_episodes", b.n_episodes},
            {"avg_score", b.avg_score ? nlohmann::json(*b.avg_score) : nlohmann::json(nullptr)}});
      }
    }
    nlohmann::json series = nlohmann::json::array();
    for (const auto& [task, points] : m.series) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& [t, score] : points) pts.push_back({t, score});
      series.push_back(nlohmann::json{{"task_id", task}, {"points", pts}});
    }
    envs_json[env] = nlohmann::json{{"n_episodes", m.n_episodes},
                                    {"aborted", m.aborted},
                                    {"corrupt", m.corrupt},
                                    {"avg_final_score", m.avg_final_score},
                                    {"success_rate", m.success_rate},
                                    {"revision_ratio_by_stage", stages},
                                    {"difficulty_buckets", buckets},
                                    {"series", series}};
  }
  return nlohmann::json{{"envs", envs_json}, {"n_runs", n_runs}};
}

MetricsReport build_report(const std::vector<Trajectory>& trajectories,
                           const std::map<std::string, int>& aborted_by_env, int corrupt,
                           int n_runs, const std::map<std::string, int>& oracle_lengths) {
  MetricsReport report;
  report.n_runs = n_runs;

  std::map<std::string, std::vector<Trajectory>> by_env;
  for (const auto& t : trajectories) by_env[t.instruction.env_id].push_back(t);
  for (const auto& [env, n] : aborted_by_env) by_env[env];  // envs seen only via aborts

  for (auto& [env, trajs] : by_env) {
    std::sort(trajs.begin(), trajs.end(), [](const Trajectory& a, const Trajectory& b) {
      if (a.instruction.task_id != b.instruction.task_id) {
        return a.instruction.task_id < b.instruction.task_id;
      }
      return a.round < b.round;
    });
    EnvMetrics m;
    m.n_episodes = static_cast<int>(trajs.size());
    if (!trajs.empty()) {
      m.avg_final_score = avg_final_score(trajs);
      m.success_rate = success_rate(trajs);
      bool have_candidates = true;
      for (const auto& t : trajs) {
        for (const auto& s : t.steps) {
          if (s.candidates.candidates.empty()) have_candidates = false;
        }
      }
      if (have_candidates) m.stages = revision_ratio(trajs);
      if (!oracle_lengths.empty()) {
        bool all_known = true;
        for (const auto& t : trajs) {
          if (!oracle_lengths.count(t.instruction.task_id)) all_known = false;
        }
        if (all_known) {
          m.buckets = difficulty_buckets(oracle_lengths, trajs);
          m.has_buckets = true;
        }
      }
      for (const auto& t : trajs) {
        if (!t.steps.empty()) {
          m.series.emplace_back(t.instruction.task_id, cumulative_series(t));
        }
      }
    }
    if (auto it = aborted_by_env.find(env); it != aborted_by_env.end()) {
      m.aborted = it->second;
    }
    report.envs[env] = std::move(m);
  }

  // Corrupt logs have no readable env; park the tally on the first row.
  if (report.envs.empty() && corrupt > 0) report.envs["(none)"] = EnvMetrics{};
  if (!report.envs.empty()) report.envs.begin()->second.corrupt += corrupt;
  return report;
}

LoadedRun load_run_dir(const std::string& dir) {
  LoadedRun out;
  std::vector<fs::path> logs;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl" &&
        entry.path().parent_path().filename() == "trajectories") {
      logs.push_back(entry.path());
    }
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    try {
      LoadedTrajectory loaded = read_trajectory_log(path.string());
      if (loaded.aborted) {
        out.aborted_by_env[loaded.trajectory.instruction.env_id] += 1;
      } else {
        out.trajectories.push_back(std::move(loaded.trajectory));
      }
    } catch (const std::exception&) {
      out.corrupt += 1;
    }
  }
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string svg_bar_chart(const std::vector<std::pair<std::string, double>>& bars,
                          const std::string& title) {
  const double width = 460.0, height = 260.0, pad = 40.0;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"460\" height=\"260\">\n";
  svg += "<text x=\"10\" y=\"18\" font-size=\"13\">" + title + "</text>\n";
  if (!bars.empty()) {
    double slot = (width - 2 * pad) / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
      double v = std::clamp(bars[i].second, 0.0, 1.0);
      double h = v * (height - 2 * pad);
      double x = pad + slot * static_cast<double>(i) + slot * 0.15;
      double y = height - pad - h;
      svg += "<rect x=\"" + format_double(x) + "\" y=\"" + format_double(y) +
             "\" width=\"" + format_double(slot * 0.7) + "\" height=\"" + format_double(h) +
             "\" fill=\"#4878a8\"/>\n";
      svg += "<text x=\"" + format_double(x) + "\" y=\"" + format_double(height - pad + 14) +
             "\" font-size=\"11\">" + bars[i].first + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string svg_series(const std::vector<std::pair<std::string, std::vector<std::pair<int, double>>>>& lines,
                       const std::string& title) {
  const double width = 460.0, height = 260.0, pad = 40.0;
  int max_t = 1;
  for (const auto& [name, pts] : lines) {
    for (const auto& [t, v] : pts) max_t = std::max(max_t, t);
  }
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"460\" height=\"260\">\n";
  svg += "<text x=\"10\" y=\"18\" font-size=\"13\">" + title + "</text>\n";
  for (const auto& [name, pts] : lines) {
    if (pts.empty()) continue;
    std::string poly;
    for (const auto& [t, v] : pts) {
      double x = pad + (width - 2 * pad) * static_cast<double>(t) / std::max(1, max_t);
      double y = height - pad - std::clamp(v, 0.0, 1.0) * (height - 2 * pad);
      poly += format_double(x) + "," + format_double(y) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"#4878a8\" stroke-width=\"1\" points=\"" +
           poly + "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

void write_figures(const std::string& dir, const MetricsReport& report) {
  fs::create_directories(dir);
  for (const auto& [env, m] : report.envs) {
    std::string prefix = env == "(none)" ? "none" : env;

    std::string stage_csv = "stage,ratio\n";
    std::vector<std::pair<std::string, double>> stage_bars;
    for (std::size_t s = 0; s < m.stages.size(); ++s) {
      auto r = m.stages[s].ratio();
      stage_csv += std::to_string(s + 1) + "," + (r ? format_double(*r) : "") + "\n";
      stage_bars.emplace_back(std::to_string(s + 1), r.value_or(0.0));
    }
    write_file(fs::path(dir) / (prefix + "_revision_ratio.csv"), stage_csv);
    write_file(fs::path(dir) / (prefix + "_revision_ratio.svg"),
               svg_bar_chart(stage_bars, env + " revision ratio by stage"));

    if (m.has_buckets) {
      std::string bucket_csv = "bucket,avg_score,n\n";
      std::vector<std::pair<std::string, double>> bucket_bars;
      const char* names[3] = {"easy", "medium", "hard"};
      for (std::size_t b = 0; b < m.buckets.size(); ++b) {
        auto avg = m.buckets[b].avg_score;
        bucket_csv += std::string(names[b]) + "," + (avg ? format_double(*avg) : "") + "," +
                      std::to_string(m.buckets[b].n_episodes) + "\n";
        bucket_bars.emplace_back(names[b], avg.value_or(0.0));
      }
      write_file(fs::path(dir) / (prefix + "_difficulty.csv"), bucket_csv);
      write_file(fs::path(dir) / (prefix + "_difficulty.svg"),
                 svg_bar_chart(bucket_bars, env + " score by difficulty"));
    }

    std::string series_csv = "step,score,task_id\n";
    for (const auto& [task, pts] : m.series) {
      for (const auto& [t, v] : pts) {
        series_csv += std::to_string(t) + "," + format_double(v) + "," + task + "\n";
      }
    }
    write_file(fs::path(dir) / (prefix + "_series.csv"), series_csv);
    write_file(fs::path(dir) / (prefix + "_series.svg"),
               svg_series(m.series, env + " cumulative score"));
  }
}

}  // namespace cgi::metrics
