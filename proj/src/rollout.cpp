#include "swarm/rollout.hpp"

#include <cmath>

namespace swarm {

double run_episode(const RolloutSetup& setup, const VectorXd& params, int episode_length,
                   std::uint64_t world_seed, std::uint64_t action_seed, bool stochastic,
                   const StepCallback& on_step) {
  const int m = setup.sim.agent_count;
  const int obs_dim = observation_dim(setup.protocol, setup.task);
  const int action_dim = setup.policy.action_dim;
  if (setup.policy.obs_dim != obs_dim)
    throw std::invalid_argument("run_episode: policy obs_dim does not match the protocol");

  WorldState world = reset_world(setup.sim, setup.task, world_seed);
  Rng action_rng(action_seed);

  // One estimate vector per POI, persisted across steps (warm start).
  std::vector<ShortestPathEstimates> estimates;
  const bool needs_sp = setup.protocol.mode == ObsMode::ShortestPath2D;
  if (needs_sp) estimates.assign(world.pois.size(), ShortestPathEstimates(m, kNoEstimate));

  std::vector<HistoryWindow> windows(
      m, HistoryWindow(setup.policy.history_length, action_dim, obs_dim));
  VectorXd prev_action = VectorXd::Zero(action_dim);
  std::vector<VectorXd> prev_actions(m, prev_action);

  MatrixXd histories(m, setup.policy.history_length * setup.policy.slot_input_dim());
  MatrixXd observations(m, obs_dim);
  MatrixXd sampled(m, action_dim);
  MatrixXd applied(m, action_dim);
  VectorXd std = policy_std(setup.policy, params);

  double episode_return = 0.0;
  for (int t = 0; t < episode_length; ++t) {
    // One synchronous message round per control step, before sensing.
    if (needs_sp)
      for (std::size_t p = 0; p < world.pois.size(); ++p)
        estimates[p] = propagate_shortest_path(world, estimates[p], world.pois[p],
                                               setup.protocol);

    for (int i = 0; i < m; ++i) {
      VectorXd obs = assemble_observation(world, i, estimates, setup.protocol, setup.task);
      observations.row(i) = obs.transpose();
      windows[i].advance(prev_actions[i], obs);
      histories.row(i) = windows[i].flat().transpose();
    }

    MatrixXd means = policy_mean_batch(setup.policy, params, histories);
    for (int i = 0; i < m; ++i)
      for (int d = 0; d < action_dim; ++d) {
        double a = stochastic ? means(i, d) + std[d] * action_rng.normal() : means(i, d);
        sampled(i, d) = a;
        applied(i, d) = std::clamp(a, -1.0, 1.0);
      }

    std::vector<MotorAction> motors(m);
    for (int i = 0; i < m; ++i) motors[i] = {applied(i, 0), applied(i, 1)};
    world = step_world(world, motors, setup.sim);
    double reward = task_reward(world, setup.task);
    episode_return += reward;

    for (int i = 0; i < m; ++i) prev_actions[i] = applied.row(i).transpose();

    if (on_step)
      on_step(StepInfo{t, world, histories, observations, means, sampled, applied, reward});
  }
  return episode_return;
}

TrajectoryBatch collect_rollouts(const RolloutSetup& setup, const VectorXd& params, int episodes,
                                 int episode_length, std::uint64_t master_seed) {
  const int m = setup.sim.agent_count;
  const int window = setup.policy.history_length * setup.policy.slot_input_dim();
  const int action_dim = setup.policy.action_dim;
  const int n = episodes * m * episode_length;

  TrajectoryBatch batch;
  batch.spec = setup.policy;
  batch.episode_length = episode_length;
  batch.histories.resize(n, window);
  batch.actions.resize(n, action_dim);
  batch.mean_old.resize(n, action_dim);
  batch.rewards.resize(n);
  batch.episode_ids.resize(n);
  batch.agent_ids.resize(n);
  batch.steps.resize(n);
  batch.episode_returns.resize(episodes);

  VectorXd std = policy_std(setup.policy, params);
  batch.log_std_old = std.array().log();

  Rng master(master_seed);
  for (int e = 0; e < episodes; ++e) {
    // Rows for episode e are laid out agent-major: each agent's trajectory is
    // contiguous and time-ordered, the shape the return recursion expects.
    const int episode_base = e * m * episode_length;
    auto row_of = [&](int agent, int t) { return episode_base + agent * episode_length + t; };

    auto sink = [&](const StepInfo& info) {
      for (int i = 0; i < m; ++i) {
        int row = row_of(i, info.t);
        batch.histories.row(row) = info.histories.row(i);
        batch.actions.row(row) = info.sampled.row(i);
        batch.mean_old.row(row) = info.means.row(i);
        batch.rewards[row] = info.reward;  // global reward, shared by all agents
        batch.episode_ids[row] = e;
        batch.agent_ids[row] = i;
        batch.steps[row] = info.t;
      }
    };

    std::uint64_t world_seed = mix_seed(master.seed(), 2 * e);
    std::uint64_t action_seed = mix_seed(master.seed(), 2 * e + 1);
    batch.episode_returns[e] =
        run_episode(setup, params, episode_length, world_seed, action_seed, true, sink);

    for (int i = 0; i < m; ++i)
      batch.segments.push_back({row_of(i, 0), episode_length, e, i});
  }

  // Log densities of the sampled actions under the collection policy.
  MatrixXd z = (batch.actions - batch.mean_old).array().rowwise() / std.transpose().array();
  double log_norm = std.array().log().sum() + 0.5 * action_dim * std::log(2.0 * M_PI);
  batch.logp_old = (-0.5 * z.array().square().rowwise().sum() - log_norm).matrix();
  return batch;
}

}  // namespace swarm
