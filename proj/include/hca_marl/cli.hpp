#pragma once

// Command-line front end: train, eval, compare and defaults.
// Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

#include <glob.h>

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hca_marl/checkpoint.hpp"
#include "hca_marl/compare.hpp"
#include "hca_marl/config.hpp"
#include "hca_marl/error.hpp"
#include "hca_marl/harness.hpp"

namespace hca_marl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || item.front() == '-') {
      throw ConfigError("seeds", "'" + item + "' is not a non-negative integer");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("seeds", "empty seed list");
  return out;
}

inline std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  std::vector<std::filesystem::path> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  return out;
}

namespace detail {

inline int cmd_train(const std::string& config_path, const std::string& out_dir, const std::string& seeds,
                     std::ostream& out) {
  ExperimentConfig cfg = load_config(config_path);
  if (!seeds.empty()) cfg.seeds = parse_seed_list(seeds);
  const std::size_t threads = seed_thread_cap();
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream snap(std::filesystem::path(out_dir) / "resolved_config.json", std::ios::binary | std::ios::trunc);
    snap << config_to_json(cfg).dump(2) << "\n";
  }
  const auto outcomes = run_experiment(cfg, out_dir, threads);
  bool any_failed = false;
  for (const auto& o : outcomes) {
    if (o.failed) {
      any_failed = true;
      out << "seed " << o.seed << " failed: " << o.error << "\n";
    } else {
      out << "seed " << o.seed << " ok: " << o.metrics_path.string() << "\n";
    }
  }
  return any_failed ? kExitRuntime : kExitOk;
}

inline int cmd_eval(const std::string& checkpoint, const std::string& scenario, std::size_t episodes,
                    std::uint64_t seed, std::ostream& out) {
  if (!std::filesystem::exists(checkpoint)) throw ConfigError("checkpoint", "no such file '" + checkpoint + "'");
  const auto records = load_checkpoint(checkpoint);
  const EvalSummary s = evaluate(records, scenario_from_string(scenario), episodes, seed);
  out << "mean_cumulative_reward=" << format_real(s.mean_cumulative_reward) << "\n";
  out << "mean_episode_length=" << format_real(s.mean_episode_length) << "\n";
  out << "episodes=" << s.episodes << "\n";
  return kExitOk;
}

inline int cmd_compare(const std::string& pattern, double smooth, const std::string& out_path, std::ostream& out) {
  const auto paths = expand_glob(pattern);
  if (paths.empty()) throw ConfigError("runs", "no files match '" + pattern + "'");
  std::vector<MetricsFile> files;
  for (const auto& p : paths) files.push_back(read_metrics_file(p));
  const Comparison c = compare_runs(files);
  ema_smooth({}, smooth);
  out << comparison_table(c);
  const std::filesystem::path base(out_path);
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  std::ofstream series(base.string() + ".csv", std::ios::binary | std::ios::trunc);
  series << comparison_series_csv(c, smooth);
  std::ofstream summary(base.string() + ".json", std::ios::binary | std::ios::trunc);
  summary << comparison_json(c, smooth).dump(2) << "\n";
  out << "series=" << base.string() << ".csv\n";
  out << "summary=" << base.string() << ".json\n";
  return kExitOk;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multi-agent PPO and HCA-PPO training harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs", seeds;
  auto* train = app.add_subcommand("train", "train every seed of an experiment config");
  train->add_option("--config", config_path, "experiment config (JSON)")->required();
  train->add_option("--out", out_dir, "output directory")->capture_default_str();
  train->add_option("--seeds", seeds, "comma-separated seed list overriding the config");

  std::string checkpoint, scenario;
  std::size_t episodes = 10;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "roll out a checkpoint's deterministic policy");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (.hcac)")->required();
  eval->add_option("--scenario", scenario, "tennis_1v1, tennis_2v2 or soccer_2v2")->required();
  eval->add_option("--episodes", episodes, "episode count")->capture_default_str();
  eval->add_option("--seed", eval_seed, "environment seed")->capture_default_str();

  std::string runs, compare_out = "comparison";
  double smooth = 0.8;
  auto* compare = app.add_subcommand("compare", "compare metrics files across algorithms");
  compare->add_option("--runs", runs, "glob matching metrics CSV files")->required();
  compare->add_option("--smooth", smooth, "EMA weight for the smoothed columns")->capture_default_str();
  compare->add_option("--out", compare_out, "output path prefix for .csv and .json")->capture_default_str();

  std::string def_scenario = "tennis_1v1", def_algorithm = "ppo";
  auto* defaults = app.add_subcommand("defaults", "print the fully resolved default config");
  defaults->add_option("--scenario", def_scenario)->capture_default_str();
  defaults->add_option("--algorithm", def_algorithm)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*train) return detail::cmd_train(config_path, out_dir, seeds, out);
    if (*eval) return detail::cmd_eval(checkpoint, scenario, episodes, eval_seed, out);
    if (*compare) return detail::cmd_compare(runs, smooth, compare_out, out);
    if (*defaults) {
      out << default_config_json(scenario_from_string(def_scenario), algorithm_from_string(def_algorithm)).dump(2)
          << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace hca_marl
