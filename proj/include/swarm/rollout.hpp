#pragma once

#include <cstdint>
#include <functional>

#include "swarm/protocols.hpp"
#include "swarm/sim.hpp"
#include "swarm/tasks.hpp"
#include "swarm/trpo.hpp"

namespace swarm {

/// Everything needed to run episodes of one configured environment.
struct RolloutSetup {
  SimConfig sim;
  TaskSpec task;
  ProtocolConfig protocol;
  PolicySpec policy;
};

/// Snapshot handed to the per-step callback after the world has advanced.
struct StepInfo {
  int t = 0;
  const WorldState& world_after;
  const MatrixXd& histories;      // M x window, policy inputs at this step
  const MatrixXd& observations;   // M x obs_dim
  const MatrixXd& means;          // M x action_dim, policy means
  const MatrixXd& sampled;        // M x action_dim, pre-clamp
  const MatrixXd& applied;        // M x action_dim, clamped motor commands
  double reward = 0.0;
};

using StepCallback = std::function<void(const StepInfo&)>;

/// Runs one episode and returns the undiscounted return. `stochastic` selects
/// sampled actions (training) versus the distribution mean (evaluation).
/// Histories record the executed, clamped actions.
double run_episode(const RolloutSetup& setup, const VectorXd& params, int episode_length,
                   std::uint64_t world_seed, std::uint64_t action_seed, bool stochastic,
                   const StepCallback& on_step = nullptr);

/// Collects `episodes` episodes with per-episode RNG streams derived from
/// master_seed and pools every agent's transitions into one batch, grouped by
/// (episode, agent) and time-ordered within each group.
TrajectoryBatch collect_rollouts(const RolloutSetup& setup, const VectorXd& params, int episodes,
                                 int episode_length, std::uint64_t master_seed);

}  // namespace swarm
