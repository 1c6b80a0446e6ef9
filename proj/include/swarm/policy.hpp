#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace swarm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Architecture of the shared weight-sharing policy: every (previous action,
/// observation) slot of the history runs through the same two dense layers,
/// the slot codes are concatenated, and a trunk maps them to the action mean.
/// A state-independent log-std per action dimension completes the Gaussian.
struct PolicySpec {
  int history_length = 2;
  int obs_dim = 0;
  int action_dim = 2;
  int slot_hidden1 = 128;
  int slot_hidden2 = 16;
  int trunk_hidden = 64;
  std::string activation = "tanh";  // hidden layers; output is linear

  int slot_input_dim() const { return action_dim + obs_dim; }
  void validate() const;

  bool operator==(const PolicySpec&) const = default;
};

/// Flat parameter count for the layout documented in ParamLayout.
int param_count(const PolicySpec& spec);

/// Offsets into the flat parameter vector. All matrices are stored
/// column-major in the order W1, b1, W2, b2, W3, b3, W4, b4, log_std, with
/// W1: (slot_hidden1 x slot_input), W2: (slot_hidden2 x slot_hidden1),
/// W3: (trunk_hidden x history_length*slot_hidden2), W4: (action_dim x trunk_hidden).
struct ParamLayout {
  explicit ParamLayout(const PolicySpec& spec);
  int w1, b1, w2, b2, w3, b3, w4, b4, log_std, total;
  int in, h1, h2, concat, trunk, out;
};

/// Fan-in scaled zero-mean init, zero biases, log_std = log(0.5).
VectorXd init_params(const PolicySpec& spec, std::uint64_t seed);

/// Fixed-length window of (previous action, observation) slots, oldest first.
/// Slots before the episode start are zero-filled.
class HistoryWindow {
 public:
  HistoryWindow(int history_length, int action_dim, int obs_dim);

  void reset();
  /// Shifts the window and appends the slot (prev_action, obs).
  void advance(const VectorXd& prev_action, const VectorXd& obs);

  const VectorXd& flat() const { return data_; }
  int slot_dim() const { return slot_dim_; }
  int slots() const { return slots_; }

 private:
  int slots_, slot_dim_, action_dim_, obs_dim_;
  VectorXd data_;
};

struct GaussianAction {
  VectorXd mean;
  VectorXd std;  // exp(log_std), elementwise positive
};

/// Diagonal Gaussian log density at `action` (pre-clamp sample).
double log_prob(const GaussianAction& dist, const VectorXd& action);

/// Closed-form KL(old || new) for diagonal Gaussians; always >= 0.
double kl_divergence(const GaussianAction& dist_old, const GaussianAction& dist_new);

/// Intermediate activations kept for the backward pass.
struct PolicyCache {
  MatrixXd slot_in;  // (N*eta, slot_input)
  MatrixXd h1;       // (N*eta, slot_hidden1), post-activation
  MatrixXd h2;       // (N*eta, slot_hidden2)
  MatrixXd concat;   // (N, eta*slot_hidden2)
  MatrixXd trunk;    // (N, trunk_hidden)
};

/// Action means for a batch of flattened histories (one row each). Fills
/// `cache` when given so policy_backward can run afterwards.
MatrixXd policy_mean_batch(const PolicySpec& spec, const VectorXd& params,
                           const MatrixXd& histories, PolicyCache* cache = nullptr);

/// Convenience wrapper for one history.
GaussianAction policy_forward(const PolicySpec& spec, const VectorXd& params,
                              const HistoryWindow& history);

/// Exact gradient of any scalar objective with respect to the full parameter
/// vector, given the objective's gradients at the network heads: d_mean has one
/// row per sample, d_log_std is the direct gradient on the (shared) log-std.
VectorXd policy_backward(const PolicySpec& spec, const VectorXd& params, const PolicyCache& cache,
                         const MatrixXd& d_mean, const VectorXd& d_log_std);

/// exp(log_std) read out of the parameter vector.
VectorXd policy_std(const PolicySpec& spec, const VectorXd& params);

}  // namespace swarm
