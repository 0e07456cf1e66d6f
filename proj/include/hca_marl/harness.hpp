#pragma once

// Self-play training runs, metrics files and checkpoints.
//
// Agents that share a group share one brain: an actor, a local critic and
// their optimizers. Every agent on both sides acts and learns at once.
// Manager critics (HCA-PPO) are extra value networks over manager
// observations with one head per assigned worker.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hca_marl/adam.hpp"
#include "hca_marl/checkpoint.hpp"
#include "hca_marl/config.hpp"
#include "hca_marl/envs/factory.hpp"
#include "hca_marl/error.hpp"
#include "hca_marl/hca.hpp"
#include "hca_marl/nn.hpp"
#include "hca_marl/policy.hpp"
#include "hca_marl/ppo.hpp"
#include "hca_marl/rollout.hpp"

namespace hca_marl {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MetricsRecord {
  std::size_t step = 0;
  std::string agent_group;
  double cumulative_reward_mean = kNaN;  // NaN when no episode finished in the interval
  double episode_length_mean = kNaN;
  double entropy = kNaN;
  double value_estimate_mean = kNaN;        // fused value
  double local_value_estimate_mean = kNaN;  // local critic only; kept in memory, not written
};

inline constexpr const char* kMetricsHeader =
    "step,agent_group,cumulative_reward_mean,episode_length_mean,entropy,value_estimate_mean";

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string metrics_csv_row(const MetricsRecord& r) {
  return std::to_string(r.step) + "," + r.agent_group + "," + format_real(r.cumulative_reward_mean) + "," +
         format_real(r.episode_length_mean) + "," + format_real(r.entropy) + "," +
         format_real(r.value_estimate_mean);
}

inline std::string run_file_stem(Scenario scenario, Algorithm algorithm, std::uint64_t seed) {
  return std::string(to_string(scenario)) + "_" + std::string(to_string(algorithm)) + "_seed" + std::to_string(seed);
}

/// One seed of one experiment.
class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed), rng_(seed) {
    cfg_.validate();
    env_ = make_env(cfg_.scenario, cfg_.env);
    build_networks();
    next_record_ = cfg_.metrics_interval;
  }

  /// Trains until `total_steps` environment steps. `sink` sees each record as it is produced.
  const std::vector<MetricsRecord>& run(const std::function<void(const MetricsRecord&)>& sink = {}) {
    sink_ = sink;
    if (cfg_.total_steps == 0) return records_;
    reset_env();
    while (steps_ < cfg_.total_steps) {
      collect();
      cut_trajectories();
      for (std::size_t b = 0; b < brains_.size(); ++b) update(b);
      ++updates_;
      if (steps_ >= next_record_ || steps_ >= cfg_.total_steps) emit_records();
    }
    return records_;
  }

  const std::vector<MetricsRecord>& records() const { return records_; }
  std::size_t env_steps() const { return steps_; }
  std::size_t update_count() const { return updates_; }
  std::uint64_t seed() const { return seed_; }
  const ExperimentConfig& config() const { return cfg_; }

  std::vector<std::string> group_names() const {
    std::vector<std::string> out;
    for (const auto& b : brains_) out.push_back(b.name);
    return out;
  }

  const PolicyHead& actor(const std::string& group) const { return brain(group).actor; }
  const Mlp& local_critic(const std::string& group) const { return brain(group).critic; }

  /// Actors, local critics and manager critics; manager critics tied to a local critic are omitted.
  std::vector<CheckpointRecord> checkpoint() const {
    std::vector<CheckpointRecord> out;
    for (const auto& b : brains_) {
      out.push_back(actor_record(b.name + "/actor", b.actor));
      out.push_back({b.name + "/critic", NetworkKind::value, b.critic, {}});
    }
    for (const auto& m : managers_) {
      if (m.net) out.push_back({"manager/" + m.spec.id, NetworkKind::value, *m.net, {}});
    }
    return out;
  }

 private:
  struct Brain {
    std::string name;
    std::vector<std::size_t> members;
    PolicyHead actor;
    AdamState actor_opt;
    Mlp critic;
    AdamState critic_opt;

    std::vector<Trajectory> trajectories;
    std::vector<std::size_t> starts;
    std::vector<std::size_t> owners;
    std::size_t buffered = 0;

    std::vector<double> episode_returns;
    std::vector<double> episode_lengths;
    double entropy_sum = 0.0;
    std::size_t entropy_count = 0;
    double fused_sum = 0.0;
    double local_sum = 0.0;
    std::size_t value_count = 0;
  };

  struct ManagerNet {
    ManagerSpec spec;
    int team = 0;
    std::vector<std::string> workers;
    std::optional<Mlp> net;
    AdamState opt;
  };

  struct WorkerCritic {
    std::size_t manager = 0;
    std::size_t head = 0;
  };

  struct WorkerRun {
    std::size_t brain = 0;
    std::vector<WorkerCritic> critics;
    Trajectory open;
    std::size_t start = 0;
    double episode_return = 0.0;
  };

  const Brain& brain(const std::string& group) const {
    for (const auto& b : brains_) {
      if (b.name == group) return b;
    }
    throw ConfigError("agent_group", "unknown agent group '" + group + "'");
  }

  std::vector<std::size_t> layer_sizes(std::size_t in, std::size_t out) const {
    std::vector<std::size_t> sizes{in};
    sizes.insert(sizes.end(), cfg_.network.hidden.begin(), cfg_.network.hidden.end());
    sizes.push_back(out);
    return sizes;
  }

  void build_networks() {
    const AdamConfig adam{cfg_.ppo.learning_rate};
    const auto& roster = env_->roster();
    workers_.resize(roster.size());
    for (std::size_t i = 0; i < roster.size(); ++i) {
      const auto& spec = roster[i];
      auto it = std::find_if(brains_.begin(), brains_.end(), [&](const Brain& b) { return b.name == spec.group; });
      if (it == brains_.end()) {
        Brain b;
        b.name = spec.group;
        Mlp policy_net(layer_sizes(spec.observation_dim, spec.action.size), cfg_.network.activation, rng_,
                       cfg_.network.actor_output_scale);
        if (spec.action.kind == ActionKind::continuous) {
          b.actor = GaussianPolicyHead(std::move(policy_net), cfg_.network.initial_log_std);
        } else {
          b.actor = CategoricalPolicyHead(std::move(policy_net));
        }
        b.actor_opt = AdamState(parameter_blocks(b.actor), adam);
        b.critic = Mlp(layer_sizes(spec.observation_dim, 1), cfg_.network.activation, rng_,
                       cfg_.network.critic_output_scale);
        b.critic_opt = AdamState(b.critic, adam);
        brains_.push_back(std::move(b));
        it = std::prev(brains_.end());
      }
      it->members.push_back(i);
      workers_[i].brain = static_cast<std::size_t>(it - brains_.begin());
    }

    for (const auto& spec : cfg_.hierarchy.managers) {
      ManagerNet m;
      m.spec = spec;
      m.workers = cfg_.hierarchy.workers_of(spec.id);
      const bool shared_layout = std::any_of(m.workers.begin(), m.workers.end(), [&](const std::string& w) {
        return roster[env_->agent_index(w)].team != roster[env_->agent_index(m.workers.front())].team;
      });
      m.team = shared_layout ? 0 : roster[env_->agent_index(m.workers.front())].team;
      if (!spec.share_local_critic) {
        const auto in = static_cast<std::size_t>(manager_observation(*env_, spec.recipe, m.team).size());
        m.net = Mlp(layer_sizes(in, m.workers.size()), cfg_.network.activation, rng_,
                    cfg_.network.critic_output_scale);
        m.opt = AdamState(*m.net, adam);
      }
      managers_.push_back(std::move(m));
    }
    for (std::size_t k = 0; k < managers_.size(); ++k) {
      for (std::size_t h = 0; h < managers_[k].workers.size(); ++h) {
        workers_[env_->agent_index(managers_[k].workers[h])].critics.push_back({k, h});
      }
    }
  }

  std::size_t critic_count(std::size_t worker) const { return 1 + workers_[worker].critics.size(); }

  void reset_env() {
    obs_ = env_->reset(rng_());
    episode_steps_ = 0;
    for (auto& w : workers_) {
      w.open = Trajectory{};
      w.start = steps_;
      w.episode_return = 0.0;
    }
  }

  std::vector<Vector> manager_inputs() const {
    std::vector<Vector> out;
    out.reserve(managers_.size());
    for (const auto& m : managers_) out.push_back(manager_observation(*env_, m.spec.recipe, m.team));
    return out;
  }

  /// Value estimates of every worker in the current environment state, local critic first.
  std::vector<std::vector<double>> value_estimates(const std::vector<Vector>& observations,
                                                   const std::vector<Vector>& mgr_in) const {
    std::vector<Vector> mgr_out(managers_.size());
    for (std::size_t k = 0; k < managers_.size(); ++k) {
      if (managers_[k].net) mgr_out[k] = managers_[k].net->forward(mgr_in[k]);
    }
    std::vector<std::vector<double>> out(workers_.size());
    for (std::size_t i = 0; i < workers_.size(); ++i) {
      const Mlp& local = brains_[workers_[i].brain].critic;
      out[i].push_back(local.forward(observations[i])[0]);
      for (const auto& c : workers_[i].critics) {
        if (managers_[c.manager].net) {
          out[i].push_back(mgr_out[c.manager][static_cast<Eigen::Index>(c.head)]);
        } else {
          out[i].push_back(local.forward(mgr_in[c.manager])[0]);
        }
      }
    }
    return out;
  }

  bool buffers_full() const {
    return std::all_of(brains_.begin(), brains_.end(),
                       [&](const Brain& b) { return b.buffered >= cfg_.buffer_size; });
  }

  void close_trajectory(std::size_t i, std::vector<double> bootstrap) {
    WorkerRun& w = workers_[i];
    Brain& b = brains_[w.brain];
    if (!w.open.transitions.empty()) {
      w.open.bootstrap_values = std::move(bootstrap);
      b.trajectories.push_back(std::move(w.open));
      b.starts.push_back(w.start);
      b.owners.push_back(i);
    }
    w.open = Trajectory{};
    w.start = steps_;
  }

  void collect() {
    const auto& roster = env_->roster();
    std::vector<Action> actions(roster.size());
    while (!buffers_full() && steps_ < cfg_.total_steps) {
      const std::vector<Vector> mgr_in = manager_inputs();
      const auto values = value_estimates(obs_, mgr_in);
      std::vector<double> log_probs(roster.size());
      for (std::size_t i = 0; i < roster.size(); ++i) {
        const PolicyHead& actor = brains_[workers_[i].brain].actor;
        actions[i] = sample_action(actor, obs_[i], rng_);
        log_probs[i] = log_prob_and_entropy(actor, obs_[i], actions[i]).log_prob;
      }
      StepResult result = env_->step(actions);
      ++steps_;
      ++episode_steps_;
      for (std::size_t i = 0; i < roster.size(); ++i) {
        WorkerRun& w = workers_[i];
        Transition t;
        t.state = obs_[i];
        for (const auto& c : w.critics) t.manager_states.push_back(mgr_in[c.manager]);
        t.action = actions[i];
        t.log_prob_old = log_probs[i];
        t.reward = result.rewards[i];
        t.done = result.done;
        t.value_estimates = values[i];
        w.open.transitions.push_back(std::move(t));
        w.episode_return += result.rewards[i];
        ++brains_[w.brain].buffered;
      }
      if (result.done || result.truncated) {
        std::vector<std::vector<double>> boot;
        if (!result.done) boot = value_estimates(result.observations, manager_inputs());
        for (std::size_t i = 0; i < roster.size(); ++i) {
          Brain& b = brains_[workers_[i].brain];
          b.episode_returns.push_back(workers_[i].episode_return);
          b.episode_lengths.push_back(static_cast<double>(episode_steps_));
          close_trajectory(i, result.done ? std::vector<double>(critic_count(i), 0.0) : boot[i]);
        }
        reset_env();
      } else {
        obs_ = std::move(result.observations);
      }
    }
  }

  /// Closes open trajectories at the buffer boundary, bootstrapping from the current state.
  void cut_trajectories() {
    const auto boot = value_estimates(obs_, manager_inputs());
    for (std::size_t i = 0; i < workers_.size(); ++i) close_trajectory(i, boot[i]);
  }

  void update(std::size_t bi) {
    Brain& b = brains_[bi];
    if (b.trajectories.empty()) return;

    // Critic slots: the local critic, then every manager network that scores one of this brain's workers.
    std::vector<CriticSlot> slots{{&b.critic, &b.critic_opt}};
    std::vector<std::size_t> slot_of(managers_.size(), 0);
    for (std::size_t k = 0; k < managers_.size(); ++k) {
      if (!managers_[k].net) continue;
      const bool used = std::any_of(b.members.begin(), b.members.end(), [&](std::size_t i) {
        return std::any_of(workers_[i].critics.begin(), workers_[i].critics.end(),
                           [&](const WorkerCritic& c) { return c.manager == k; });
      });
      if (!used) continue;
      slot_of[k] = slots.size();
      slots.push_back({&*managers_[k].net, &managers_[k].opt});
    }

    UpdateBatch batch;
    std::vector<double> raw_adv;
    for (std::size_t n = 0; n < b.trajectories.size(); ++n) {
      const Trajectory& traj = b.trajectories[n];
      const std::size_t start = b.starts[n];
      const std::size_t worker = b.owners[n];
      const auto adv = fused_advantages(traj, cfg_.advantage, cfg_.schedule, start);
      const auto targets = fused_value_targets(traj, cfg_.advantage, cfg_.schedule, start);
      const auto fused = fused_values(traj, cfg_.schedule, start);
      for (std::size_t j = 0; j < traj.size(); ++j) {
        const Transition& t = traj.transitions[j];
        batch.states.push_back(t.state);
        batch.actions.push_back(t.action);
        batch.log_probs_old.push_back(t.log_prob_old);
        raw_adv.push_back(adv[j]);
        std::vector<CriticSample> samples{{0, 0, t.state, targets[j]}};
        const auto& critics = workers_[worker].critics;
        for (std::size_t c = 0; c < critics.size(); ++c) {
          if (!managers_[critics[c].manager].net) continue;
          samples.push_back({slot_of[critics[c].manager], critics[c].head, t.manager_states[c], targets[j]});
        }
        batch.value_targets.push_back(std::move(samples));
        b.fused_sum += fused.values[j];
        b.local_sum += t.value_estimates[0];
        ++b.value_count;
      }
    }
    batch.advantages = cfg_.advantage.normalize ? normalize_advantages(raw_adv) : raw_adv;

    Matrix states(static_cast<Eigen::Index>(batch.states.front().size()), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) states.col(static_cast<Eigen::Index>(k)) = batch.states[k];
    b.entropy_sum += mean_entropy(b.actor, states);
    ++b.entropy_count;

    ppo_update(b.actor, b.actor_opt, slots, batch, cfg_.ppo, rng_);

    b.trajectories.clear();
    b.starts.clear();
    b.owners.clear();
    b.buffered = 0;
  }

  void emit_records() {
    for (auto& b : brains_) {
      MetricsRecord r;
      r.step = steps_;
      r.agent_group = b.name;
      if (!b.episode_returns.empty()) {
        r.cumulative_reward_mean = mean(b.episode_returns);
        r.episode_length_mean = mean(b.episode_lengths);
      }
      if (b.entropy_count > 0) r.entropy = b.entropy_sum / static_cast<double>(b.entropy_count);
      if (b.value_count > 0) {
        r.value_estimate_mean = b.fused_sum / static_cast<double>(b.value_count);
        r.local_value_estimate_mean = b.local_sum / static_cast<double>(b.value_count);
      }
      b.episode_returns.clear();
      b.episode_lengths.clear();
      b.entropy_sum = b.fused_sum = b.local_sum = 0.0;
      b.entropy_count = b.value_count = 0;
      records_.push_back(r);
      if (sink_) sink_(r);
    }
    while (next_record_ <= steps_) next_record_ += cfg_.metrics_interval;
  }

  static double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }

  ExperimentConfig cfg_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::unique_ptr<MultiAgentEnv> env_;
  std::vector<Brain> brains_;
  std::vector<ManagerNet> managers_;
  std::vector<WorkerRun> workers_;
  std::vector<Vector> obs_;
  std::size_t steps_ = 0;
  std::size_t episode_steps_ = 0;
  std::size_t updates_ = 0;
  std::size_t next_record_ = 0;
  std::vector<MetricsRecord> records_;
  std::function<void(const MetricsRecord&)> sink_;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::filesystem::path metrics_path;
  std::filesystem::path checkpoint_path;
  std::vector<MetricsRecord> records;
};

/// Parallel seed jobs: HCA_MARL_THREADS, default 1.
inline std::size_t seed_thread_cap() {
  const char* v = std::getenv("HCA_MARL_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("HCA_MARL_THREADS", "must be a positive integer");
  return static_cast<std::size_t>(n);
}

/// Trains one seed, streaming its metrics file. A non-finite loss or any other
/// training error ends the seed with a `# failed:` line instead of throwing.
inline SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir) {
  SeedOutcome out;
  out.seed = seed;
  const std::string stem = run_file_stem(cfg.scenario, cfg.algorithm, seed);
  out.metrics_path = out_dir / (stem + ".csv");
  out.checkpoint_path = out_dir / (stem + ".hcac");
  std::ofstream csv(out.metrics_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write metrics file " + out.metrics_path.string());
  csv << kMetricsHeader << "\n";
  csv.flush();
  try {
    Trainer trainer(cfg, seed);
    trainer.run([&](const MetricsRecord& r) {
      csv << metrics_csv_row(r) << "\n";
      csv.flush();
    });
    out.records = trainer.records();
    save_checkpoint(out.checkpoint_path, trainer.checkpoint());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
    std::string line = e.what();
    std::replace(line.begin(), line.end(), '\n', ' ');
    csv << "# failed: " << line << "\n";
  }
  return out;
}

/// Runs every seed of `cfg`, up to `threads` at a time. Results are in seed order.
inline std::vector<SeedOutcome> run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                               std::size_t threads = 1) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  std::vector<SeedOutcome> outcomes(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < cfg.seeds.size(); k = next++) {
      try {
        outcomes[k] = run_seed(cfg, cfg.seeds[k], out_dir);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(threads, 1, cfg.seeds.size());
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outcomes;
}

struct EvalSummary {
  double mean_cumulative_reward = 0.0;  // per-agent episode return, averaged over agents and episodes
  double mean_episode_length = 0.0;
  std::size_t episodes = 0;
};

/// Rolls out the deterministic policy (Gaussian mean, categorical argmax).
inline EvalSummary evaluate(const std::vector<CheckpointRecord>& checkpoint, Scenario scenario, std::size_t episodes,
                            std::uint64_t seed, const EnvOptions& env_options = {}) {
  if (episodes == 0) throw ConfigError("episodes", "must be positive");
  auto env = make_env(scenario, env_options);
  const auto& roster = env->roster();
  std::vector<PolicyHead> heads;
  std::vector<std::size_t> head_of(roster.size());
  std::vector<std::string> groups;
  for (std::size_t i = 0; i < roster.size(); ++i) {
    const auto& spec = roster[i];
    auto g = std::find(groups.begin(), groups.end(), spec.group);
    if (g == groups.end()) {
      const std::string name = spec.group + "/actor";
      auto rec = std::find_if(checkpoint.begin(), checkpoint.end(),
                              [&](const CheckpointRecord& r) { return r.name == name; });
      if (rec == checkpoint.end()) {
        throw ShapeError("checkpoint has no actor '" + name + "' for scenario " + std::string(to_string(scenario)));
      }
      const bool continuous = spec.action.kind == ActionKind::continuous;
      const NetworkKind want = continuous ? NetworkKind::gaussian_actor : NetworkKind::categorical_actor;
      if (rec->kind != want || rec->net.input_dim() != spec.observation_dim ||
          rec->net.output_dim() != spec.action.size) {
        throw ShapeError("actor '" + name + "' has shape " + std::to_string(rec->net.input_dim()) + "->" +
                         std::to_string(rec->net.output_dim()) + ", scenario needs " +
                         std::to_string(spec.observation_dim) + "->" + std::to_string(spec.action.size));
      }
      groups.push_back(spec.group);
      heads.push_back(head_from_record(*rec));
      g = std::prev(groups.end());
    }
    head_of[i] = static_cast<std::size_t>(g - groups.begin());
  }

  std::mt19937_64 rng(seed);
  EvalSummary out;
  out.episodes = episodes;
  std::vector<Action> actions(roster.size());
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    std::vector<Vector> obs = env->reset(rng());
    std::vector<double> returns(roster.size(), 0.0);
    std::size_t length = 0;
    for (;;) {
      for (std::size_t i = 0; i < roster.size(); ++i) actions[i] = mode_action(heads[head_of[i]], obs[i]);
      StepResult r = env->step(actions);
      ++length;
      for (std::size_t i = 0; i < roster.size(); ++i) returns[i] += r.rewards[i];
      if (r.done || r.truncated) break;
      obs = std::move(r.observations);
    }
    double sum = 0.0;
    for (double x : returns) sum += x;
    out.mean_cumulative_reward += sum / static_cast<double>(roster.size());
    out.mean_episode_length += static_cast<double>(length);
  }
  out.mean_cumulative_reward /= static_cast<double>(episodes);
  out.mean_episode_length /= static_cast<double>(episodes);
  return out;
}

}  // namespace hca_marl
