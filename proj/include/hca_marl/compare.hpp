#pragma once

// Cross-run comparison of metrics files: per-step seed medians, final-window
// means and gaps against a baseline, plus display smoothing.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hca_marl/error.hpp"
#include "hca_marl/harness.hpp"
#include "json.hpp"

namespace hca_marl {

inline constexpr const char* kMetricNames[] = {"cumulative_reward_mean", "episode_length_mean", "entropy",
                                               "value_estimate_mean"};
inline constexpr std::size_t kMetricCount = 4;

struct MetricsFile {
  std::filesystem::path path;
  std::string scenario;
  std::string algorithm;
  std::uint64_t seed = 0;
  bool failed = false;
  std::vector<MetricsRecord> records;
};

inline double metric_value(const MetricsRecord& r, std::size_t metric) {
  switch (metric) {
    case 0: return r.cumulative_reward_mean;
    case 1: return r.episode_length_mean;
    case 2: return r.entropy;
    default: return r.value_estimate_mean;
  }
}

/// Parses `<scenario>_<algorithm>_seed<k>.csv` and its rows.
inline MetricsFile read_metrics_file(const std::filesystem::path& path) {
  static const std::regex name_re(R"(^(tennis_1v1|tennis_2v2|soccer_2v2)_(ppo|hca_ppo)_seed(\d+)\.csv$)");
  MetricsFile f;
  f.path = path;
  std::smatch m;
  const std::string name = path.filename().string();
  if (!std::regex_match(name, m, name_re)) {
    throw ConfigError("runs", "'" + name + "' is not named <scenario>_<algorithm>_seed<k>.csv");
  }
  f.scenario = m[1];
  f.algorithm = m[2];
  f.seed = std::stoull(m[3]);

  std::ifstream in(path);
  if (!in) throw ConfigError("runs", "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ConfigError("runs", path.string() + ": unexpected metrics header");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# failed", 0) == 0) {
      f.failed = true;
      continue;
    }
    if (line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ConfigError("runs", path.string() + ":" + std::to_string(line_no) + ": expected 6 columns");
    MetricsRecord r;
    try {
      r.step = std::stoull(cells[0]);
      r.agent_group = cells[1];
      r.cumulative_reward_mean = std::stod(cells[2]);
      r.episode_length_mean = std::stod(cells[3]);
      r.entropy = std::stod(cells[4]);
      r.value_estimate_mean = std::stod(cells[5]);
    } catch (const std::exception&) {
      throw ConfigError("runs", path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    f.records.push_back(r);
  }
  return f;
}

/// s_0 = x_0, s_t = w s_{t-1} + (1 - w) x_t. NaN entries pass through and do not reset the state.
inline std::vector<double> ema_smooth(const std::vector<double>& x, double weight) {
  if (!(weight >= 0.0 && weight < 1.0)) throw ConfigError("smooth", "must lie in [0, 1)");
  std::vector<double> s(x.size());
  bool started = false;
  double state = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (std::isnan(x[t])) {
      s[t] = x[t];
      continue;
    }
    state = started ? weight * state + (1.0 - weight) * x[t] : x[t];
    started = true;
    s[t] = state;
  }
  return s;
}

/// Median of the finite entries; NaN if there are none.
inline double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct MedianSeries {
  std::string label;
  std::string agent_group;
  std::vector<std::size_t> steps;
  std::vector<std::vector<double>> medians;  // [metric][step index]
  std::size_t seeds = 0;
};

struct FinalWindowSummary {
  std::string label;
  std::string agent_group;
  std::size_t seeds = 0;
  double cumulative_reward = 0.0;
  double episode_length = 0.0;
  double reward_gap = 0.0;  // relative to the baseline label
  double length_gap = 0.0;
};

struct Comparison {
  std::string scenario;
  std::string baseline;
  std::vector<MedianSeries> series;
  std::vector<FinalWindowSummary> summary;
};

/// Mean of the finite entries over the last 10% of the step range (at least the last entry).
inline double final_window_mean(const std::vector<std::size_t>& steps, const std::vector<double>& values) {
  if (steps.empty()) return std::nan("");
  const double last = static_cast<double>(steps.back());
  const double cut = last - 0.1 * last;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const bool in_window = static_cast<double>(steps[k]) >= cut || k + 1 == steps.size();
    if (in_window && !std::isnan(values[k])) {
      sum += values[k];
      ++n;
    }
  }
  return n == 0 ? std::nan("") : sum / static_cast<double>(n);
}

/// Label of a file: its algorithm, qualified by the parent directory when files come from several directories.
inline std::vector<std::string> run_labels(const std::vector<MetricsFile>& files) {
  std::set<std::filesystem::path> dirs;
  for (const auto& f : files) dirs.insert(f.path.parent_path());
  std::vector<std::string> out;
  for (const auto& f : files) {
    out.push_back(dirs.size() > 1 ? f.path.parent_path().filename().string() + "/" + f.algorithm : f.algorithm);
  }
  return out;
}

inline Comparison compare_runs(const std::vector<MetricsFile>& files) {
  if (files.size() < 2) throw ConfigError("runs", "need at least 2 metrics files, got " + std::to_string(files.size()));
  Comparison c;
  c.scenario = files.front().scenario;
  for (const auto& f : files) {
    if (f.scenario != c.scenario) {
      throw ConfigError("runs", "mixed scenarios: " + c.scenario + " and " + f.scenario + " (" + f.path.string() + ")");
    }
  }
  const auto labels = run_labels(files);
  std::vector<std::string> order;
  for (const auto& l : labels) {
    if (std::find(order.begin(), order.end(), l) == order.end()) order.push_back(l);
  }
  std::sort(order.begin(), order.end());
  c.baseline = order.front();
  for (const auto& l : order) {
    if (l == "ppo" || (l.size() > 4 && l.ends_with("/ppo"))) {
      c.baseline = l;
      break;
    }
  }

  for (const auto& label : order) {
    std::set<std::string> groups;
    std::size_t seeds = 0;
    for (std::size_t k = 0; k < files.size(); ++k) {
      if (labels[k] != label) continue;
      ++seeds;
      for (const auto& r : files[k].records) groups.insert(r.agent_group);
    }
    for (const auto& group : groups) {
      std::map<std::size_t, std::vector<std::vector<double>>> by_step;  // step -> [metric] -> seed values
      for (std::size_t k = 0; k < files.size(); ++k) {
        if (labels[k] != label) continue;
        for (const auto& r : files[k].records) {
          if (r.agent_group != group) continue;
          auto& slot = by_step[r.step];
          slot.resize(kMetricCount);
          for (std::size_t m = 0; m < kMetricCount; ++m) slot[m].push_back(metric_value(r, m));
        }
      }
      MedianSeries s;
      s.label = label;
      s.agent_group = group;
      s.seeds = seeds;
      s.medians.resize(kMetricCount);
      for (const auto& [step, values] : by_step) {
        s.steps.push_back(step);
        for (std::size_t m = 0; m < kMetricCount; ++m) s.medians[m].push_back(median(values[m]));
      }
      FinalWindowSummary w;
      w.label = label;
      w.agent_group = group;
      w.seeds = seeds;
      w.cumulative_reward = final_window_mean(s.steps, s.medians[0]);
      w.episode_length = final_window_mean(s.steps, s.medians[1]);
      c.series.push_back(std::move(s));
      c.summary.push_back(w);
    }
  }
  for (auto& w : c.summary) {
    for (const auto& b : c.summary) {
      if (b.label == c.baseline && b.agent_group == w.agent_group) {
        w.reward_gap = w.cumulative_reward - b.cumulative_reward;
        w.length_gap = w.episode_length - b.episode_length;
      }
    }
  }
  return c;
}

inline std::string comparison_table(const Comparison& c) {
  std::ostringstream os;
  os << "scenario " << c.scenario << ", baseline " << c.baseline << ", final window = last 10% of steps\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %-10s %5s %14s %14s %12s %12s\n", "label", "group", "seeds", "final_reward",
                "final_length", "reward_gap", "length_gap");
  os << buf;
  for (const auto& w : c.summary) {
    std::snprintf(buf, sizeof buf, "%-24s %-10s %5zu %14.6g %14.6g %12.6g %12.6g\n", w.label.c_str(),
                  w.agent_group.c_str(), w.seeds, w.cumulative_reward, w.episode_length, w.reward_gap, w.length_gap);
    os << buf;
  }
  return os.str();
}

/// Long-format aligned series: one row per label, group, step and metric, raw and smoothed.
inline std::string comparison_series_csv(const Comparison& c, double smooth) {
  std::ostringstream os;
  os << "label,agent_group,step,metric,median,smoothed\n";
  for (const auto& s : c.series) {
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      const auto sm = ema_smooth(s.medians[m], smooth);
      for (std::size_t k = 0; k < s.steps.size(); ++k) {
        os << s.label << "," << s.agent_group << "," << s.steps[k] << "," << kMetricNames[m] << ","
           << format_real(s.medians[m][k]) << "," << format_real(sm[k]) << "\n";
      }
    }
  }
  return os.str();
}

inline nlohmann::ordered_json comparison_json(const Comparison& c, double smooth) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
  nlohmann::ordered_json j;
  j["scenario"] = c.scenario;
  j["baseline"] = c.baseline;
  j["smoothing"] = smooth;
  j["summary"] = nlohmann::ordered_json::array();
  for (const auto& w : c.summary) {
    j["summary"].push_back({{"label", w.label},
                            {"agent_group", w.agent_group},
                            {"seeds", w.seeds},
                            {"final_cumulative_reward", num(w.cumulative_reward)},
                            {"final_episode_length", num(w.episode_length)},
                            {"reward_gap", num(w.reward_gap)},
                            {"length_gap", num(w.length_gap)}});
  }
  return j;
}

}  // namespace hca_marl
