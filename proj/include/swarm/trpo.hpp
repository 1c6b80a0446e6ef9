#pragma once

#include <Eigen/Core>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarm/policy.hpp"

namespace swarm {

/// Raised when an optimization quantity turns non-finite; trpo_update catches
/// it and degrades to a no-op update.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrpoConfig {
  double kl_bound = 0.01;          // delta
  double discount = 0.99;          // gamma
  int cg_iterations = 10;
  double cg_damping = 0.1;
  double backtrack_ratio = 0.8;
  int max_backtracks = 15;
  int episodes_per_iteration = 8;
  int iterations = 100;
  int episode_length = 500;
  // Stride for the Fisher-vector-product batch; 1 uses every transition.
  int fvp_subsample = 1;

  void validate() const;
};

/// One agent-step. Reward is the global task reward, identical for every
/// agent at the same (episode, t).
struct Transition {
  VectorXd history;  // flattened window the action was sampled from
  VectorXd action;   // pre-clamp sample; log_prob/ratios use this
  double reward = 0.0;
  int episode_id = 0;
  int agent_id = 0;
  int t = 0;
};

/// Pooled homogeneous-agent rollouts, stored struct-of-arrays with one row per
/// transition. Rows are grouped into per-(episode, agent) trajectories that
/// are contiguous and time-ordered.
struct TrajectoryBatch {
  PolicySpec spec;
  int episode_length = 0;

  MatrixXd histories;  // N x (eta * slot_dim)
  MatrixXd actions;    // N x action_dim
  VectorXd rewards;
  VectorXd returns;
  VectorXd advantages;
  std::vector<int> episode_ids, agent_ids, steps;

  // Policy outputs snapshotted at collection time (the "old" policy).
  MatrixXd mean_old;     // N x action_dim
  VectorXd log_std_old;  // action_dim
  VectorXd logp_old;     // N

  struct Segment {
    int start = 0, length = 0, episode_id = 0, agent_id = 0;
  };
  std::vector<Segment> segments;

  VectorXd episode_returns;  // undiscounted, one per episode

  int size() const { return static_cast<int>(histories.rows()); }
};

/// Discounted backward recursion G_t = r_t + gamma * G_{t+1} per trajectory.
void compute_returns(TrajectoryBatch& batch, double discount);

/// Linear value predictor on [latest observation, t/T, (t/T)^2, 1].
struct BaselineModel {
  VectorXd weights;

  double predict(const VectorXd& features) const { return weights.dot(features); }
};

/// Ridge least-squares fit (lambda = 1e-6) of returns on the baseline features.
BaselineModel fit_baseline(const TrajectoryBatch& batch);

VectorXd baseline_predictions(const TrajectoryBatch& batch, const BaselineModel& model);

/// advantage = return - baseline, then normalized to zero mean / unit sample
/// std. Returns false (leaving raw advantages in place) when the batch is
/// degenerate, i.e. the advantages have no variance.
bool estimate_advantages(TrajectoryBatch& batch, const BaselineModel& baseline);

/// Importance-ratio surrogate mean(exp(logp - logp_old) * advantage), with
/// logp_old recomputed under params_old. Maximization convention.
double surrogate_loss(const PolicySpec& spec, const VectorXd& params, const VectorXd& params_old,
                      const TrajectoryBatch& batch);

/// Same surrogate against the collection-time snapshot stored in the batch.
double surrogate_loss(const PolicySpec& spec, const VectorXd& params,
                      const TrajectoryBatch& batch);

/// Gradient of the snapshot surrogate with respect to params.
VectorXd surrogate_gradient(const PolicySpec& spec, const VectorXd& params,
                            const TrajectoryBatch& batch);

/// Mean KL(collection policy || params policy) over the batch.
double mean_kl(const PolicySpec& spec, const VectorXd& params, const TrajectoryBatch& batch);

/// Gradient of mean_kl with respect to params.
VectorXd mean_kl_gradient(const PolicySpec& spec, const VectorXd& params,
                          const TrajectoryBatch& batch);

/// Solves fvp(x) = g by conjugate gradients. Throws NumericError on
/// non-finite values.
VectorXd conjugate_gradient(const std::function<VectorXd(const VectorXd&)>& fvp,
                            const VectorXd& g, int iterations, double tolerance);

/// (Hessian of mean KL) * v + damping * v, via a symmetric finite difference
/// of exact KL gradients along v. Throws NumericError on non-finite values.
VectorXd fisher_vector_product(const PolicySpec& spec, const VectorXd& params,
                               const TrajectoryBatch& batch, const VectorXd& v, double damping);

struct TrpoStats {
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double kl = 0.0;
  double step_norm = 0.0;
  int backtracks = 0;
  bool accepted = false;
  std::string note;
};

struct TrpoUpdateResult {
  VectorXd params;
  TrpoStats stats;
};

/// Natural-gradient step capped by the KL trust region, with a backtracking
/// line search that requires positive surrogate improvement and measured
/// KL <= kl_bound. Falls back to returning the input parameters unchanged when
/// no candidate is acceptable or anything turns non-finite.
TrpoUpdateResult trpo_update(const PolicySpec& spec, const VectorXd& params,
                             const TrajectoryBatch& batch, const TrpoConfig& config);

}  // namespace swarm
