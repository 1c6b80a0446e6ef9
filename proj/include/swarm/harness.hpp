#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "swarm/checkpoint.hpp"
#include "swarm/rollout.hpp"

namespace swarm {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fully resolved run description. Loaded from a JSON document whose sections
/// mirror the sub-configs; unknown keys are rejected and every derived field
/// (observation dimension, link radius) is filled in before anything runs.
struct RunConfig {
  TaskSpec task = TaskSpec::make_edge();
  SimConfig sim;
  ProtocolConfig protocol;
  PolicySpec policy;
  TrpoConfig trpo;
  std::uint64_t master_seed = 0;
  int eval_episodes = 20;

  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

RolloutSetup rollout_setup(const RunConfig& config);

struct IterationRecord {
  int iteration = 0;
  double mean_return = 0.0;        // undiscounted episode return, mean over episodes
  double std_return = 0.0;
  double mean_kl = 0.0;
  double surrogate_improvement = 0.0;
  double wall_clock_seconds = 0.0;  // reported on stderr only; the CSV stays
                                    // deterministic for a given config + seed
};

/// Called after each iteration; return true to stop training early (used by
/// target-driven runs). Evaluation inside the callback must not touch the
/// training RNG streams, which it cannot: all streams are derived per use.
using ProgressCallback = std::function<bool(int iterations_done, const VectorXd& params)>;

struct TrainResult {
  VectorXd params;
  std::vector<IterationRecord> records;
};

/// Full training loop: collect -> returns -> baseline -> advantages -> update,
/// for trpo.iterations rounds. Writes learning_curve.csv, resolved_config.json,
/// checkpoint_init / checkpoint_NNNN (every 10) / checkpoint_final into
/// out_dir. Deterministic: (config, master_seed) fixes every output byte.
TrainResult run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                         const ProgressCallback& progress = nullptr);

struct EvalMetrics {
  int episodes = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  // Edge task
  double mean_active_edges = 0.0;     // active pairs per step
  // Link task
  double link_established_fraction = 0.0;
  double mean_link_reward = 0.0;
};

/// Deterministic evaluation (actions = distribution mean, no sampling).
EvalMetrics evaluate(const Checkpoint& checkpoint, const RunConfig& config, int n_episodes,
                     std::uint64_t seed);

/// Writes one JSON header line plus one JSON record per (step, agent):
/// post-step pose, applied action, global reward and the observation the
/// action was computed from.
void replay_dump(const Checkpoint& checkpoint, const RunConfig& config, std::uint64_t episode_seed,
                 const std::filesystem::path& out_path);

}  // namespace swarm
