#include "swarm/trpo.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>

namespace swarm {

void TrpoConfig::validate() const {
  if (kl_bound <= 0.0) throw std::invalid_argument("trpo: kl_bound must be positive");
  if (discount <= 0.0 || discount > 1.0) throw std::invalid_argument("trpo: discount in (0, 1]");
  if (cg_iterations < 1) throw std::invalid_argument("trpo: cg_iterations >= 1");
  if (cg_damping <= 0.0) throw std::invalid_argument("trpo: cg_damping must be positive");
  if (backtrack_ratio <= 0.0 || backtrack_ratio >= 1.0)
    throw std::invalid_argument("trpo: backtrack_ratio in (0, 1)");
  if (max_backtracks < 0) throw std::invalid_argument("trpo: max_backtracks >= 0");
  if (episodes_per_iteration < 1) throw std::invalid_argument("trpo: episodes >= 1");
  if (iterations < 0) throw std::invalid_argument("trpo: iterations >= 0");
  if (episode_length < 1) throw std::invalid_argument("trpo: episode_length >= 1");
  if (fvp_subsample < 1) throw std::invalid_argument("trpo: fvp_subsample >= 1");
}

void compute_returns(TrajectoryBatch& batch, double discount) {
  batch.returns.resize(batch.size());
  for (const auto& seg : batch.segments) {
    double running = 0.0;
    for (int i = seg.start + seg.length - 1; i >= seg.start; --i) {
      running = batch.rewards[i] + discount * running;
      batch.returns[i] = running;
    }
  }
}

namespace {

int baseline_feature_dim(const TrajectoryBatch& batch) { return batch.spec.obs_dim + 3; }

VectorXd baseline_features(const TrajectoryBatch& batch, int row) {
  const int slot_dim = batch.spec.slot_input_dim();
  const int obs_dim = batch.spec.obs_dim;
  const int last_obs = (batch.spec.history_length - 1) * slot_dim + batch.spec.action_dim;
  VectorXd f(obs_dim + 3);
  f.head(obs_dim) = batch.histories.row(row).segment(last_obs, obs_dim);
  double progress = static_cast<double>(batch.steps[row]) / batch.episode_length;
  f[obs_dim] = progress;
  f[obs_dim + 1] = progress * progress;
  f[obs_dim + 2] = 1.0;
  return f;
}

}  // namespace

BaselineModel fit_baseline(const TrajectoryBatch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("fit_baseline: empty batch");
  const int d = baseline_feature_dim(batch);
  MatrixXd gram = MatrixXd::Zero(d, d);
  VectorXd moment = VectorXd::Zero(d);
  for (int i = 0; i < batch.size(); ++i) {
    VectorXd f = baseline_features(batch, i);
    gram.noalias() += f * f.transpose();
    moment.noalias() += f * batch.returns[i];
  }
  gram.diagonal().array() += 1e-6;  // ridge, keeps the solve well-posed
  BaselineModel model;
  model.weights = gram.ldlt().solve(moment);
  return model;
}

VectorXd baseline_predictions(const TrajectoryBatch& batch, const BaselineModel& model) {
  VectorXd pred(batch.size());
  for (int i = 0; i < batch.size(); ++i) pred[i] = model.predict(baseline_features(batch, i));
  return pred;
}

bool estimate_advantages(TrajectoryBatch& batch, const BaselineModel& baseline) {
  batch.advantages = batch.returns - baseline_predictions(batch, baseline);
  const int n = batch.size();
  double mean = batch.advantages.mean();
  double var = (batch.advantages.array() - mean).square().sum() / std::max(n - 1, 1);
  double std = std::sqrt(var);
  if (std < 1e-12) {
    std::fprintf(stderr, "warning: degenerate batch, advantages have no variance; "
                         "normalization skipped\n");
    return false;
  }
  batch.advantages = (batch.advantages.array() - mean) / std;
  return true;
}

namespace {

// Per-sample log densities under the given means and a shared std vector.
VectorXd gaussian_logp(const MatrixXd& means, const VectorXd& std, const MatrixXd& actions) {
  const int n = static_cast<int>(means.rows());
  const double log_norm =
      std.array().log().sum() + 0.5 * std.size() * std::log(2.0 * M_PI);
  VectorXd lp(n);
  for (int i = 0; i < n; ++i) {
    double q = ((actions.row(i) - means.row(i)).transpose().array() / std.array())
                   .square()
                   .sum();
    lp[i] = -0.5 * q - log_norm;
  }
  return lp;
}

}  // namespace

double surrogate_loss(const PolicySpec& spec, const VectorXd& params,
                      const TrajectoryBatch& batch) {
  MatrixXd means = policy_mean_batch(spec, params, batch.histories);
  VectorXd std = policy_std(spec, params);
  VectorXd lp = gaussian_logp(means, std, batch.actions);
  return ((lp - batch.logp_old).array().exp() * batch.advantages.array()).mean();
}

double surrogate_loss(const PolicySpec& spec, const VectorXd& params, const VectorXd& params_old,
                      const TrajectoryBatch& batch) {
  MatrixXd means_old = policy_mean_batch(spec, params_old, batch.histories);
  VectorXd std_old = policy_std(spec, params_old);
  VectorXd lp_old = gaussian_logp(means_old, std_old, batch.actions);

  MatrixXd means = policy_mean_batch(spec, params, batch.histories);
  VectorXd std = policy_std(spec, params);
  VectorXd lp = gaussian_logp(means, std, batch.actions);
  return ((lp - lp_old).array().exp() * batch.advantages.array()).mean();
}

VectorXd surrogate_gradient(const PolicySpec& spec, const VectorXd& params,
                            const TrajectoryBatch& batch) {
  PolicyCache cache;
  MatrixXd means = policy_mean_batch(spec, params, batch.histories, &cache);
  VectorXd std = policy_std(spec, params);
  VectorXd lp = gaussian_logp(means, std, batch.actions);
  VectorXd weight =
      ((lp - batch.logp_old).array().exp() * batch.advantages.array()) / batch.size();

  // d surrogate / d mean and / d log_std of the Gaussian log density.
  MatrixXd z = (batch.actions - means).array().rowwise() / std.transpose().array();
  MatrixXd d_mean = (z.array().rowwise() / std.transpose().array()).colwise() * weight.array();
  VectorXd d_log_std =
      ((z.array().square() - 1.0).colwise() * weight.array()).colwise().sum().transpose();
  return policy_backward(spec, params, cache, d_mean, d_log_std);
}

double mean_kl(const PolicySpec& spec, const VectorXd& params, const TrajectoryBatch& batch) {
  MatrixXd means = policy_mean_batch(spec, params, batch.histories);
  VectorXd std_new = policy_std(spec, params);
  VectorXd std_old = batch.log_std_old.array().exp();

  double total = 0.0;
  for (int i = 0; i < batch.size(); ++i) {
    for (int d = 0; d < spec.action_dim; ++d) {
      double so = std_old[d], sn = std_new[d];
      double dm = batch.mean_old(i, d) - means(i, d);
      total += std::log(sn / so) + (so * so + dm * dm) / (2.0 * sn * sn) - 0.5;
    }
  }
  return total / batch.size();
}

VectorXd mean_kl_gradient(const PolicySpec& spec, const VectorXd& params,
                          const TrajectoryBatch& batch) {
  PolicyCache cache;
  MatrixXd means = policy_mean_batch(spec, params, batch.histories, &cache);
  VectorXd std_new = policy_std(spec, params);
  VectorXd std_old = batch.log_std_old.array().exp();
  const double n = batch.size();

  MatrixXd diff = means - batch.mean_old;  // mean_new - mean_old
  MatrixXd d_mean =
      (diff.array().rowwise() / std_new.transpose().array().square()) / n;
  VectorXd d_log_std(spec.action_dim);
  for (int d = 0; d < spec.action_dim; ++d) {
    double sn2 = std_new[d] * std_new[d];
    double so2 = std_old[d] * std_old[d];
    double acc = 0.0;
    for (int i = 0; i < batch.size(); ++i) {
      double dm = diff(i, d);
      acc += 1.0 - (so2 + dm * dm) / sn2;
    }
    d_log_std[d] = acc / n;
  }
  return policy_backward(spec, params, cache, d_mean, d_log_std);
}

VectorXd conjugate_gradient(const std::function<VectorXd(const VectorXd&)>& fvp,
                            const VectorXd& g, int iterations, double tolerance) {
  VectorXd x = VectorXd::Zero(g.size());
  VectorXd residual = g;
  VectorXd direction = g;
  double rr = residual.squaredNorm();
  if (std::sqrt(rr) <= tolerance) return x;

  for (int it = 0; it < iterations; ++it) {
    VectorXd ap = fvp(direction);
    double curvature = direction.dot(ap);
    if (!std::isfinite(curvature) || curvature <= 0.0)
      throw NumericError("conjugate_gradient: non-finite or non-positive curvature");
    double alpha = rr / curvature;
    x += alpha * direction;
    residual -= alpha * ap;
    double rr_next = residual.squaredNorm();
    if (!std::isfinite(rr_next)) throw NumericError("conjugate_gradient: diverged");
    if (std::sqrt(rr_next) <= tolerance) break;
    direction = residual + (rr_next / rr) * direction;
    rr = rr_next;
  }
  return x;
}

VectorXd fisher_vector_product(const PolicySpec& spec, const VectorXd& params,
                               const TrajectoryBatch& batch, const VectorXd& v, double damping) {
  double norm = v.norm();
  if (norm == 0.0) return VectorXd::Zero(v.size());
  if (!std::isfinite(norm)) throw NumericError("fisher_vector_product: non-finite direction");

  // Symmetric difference of exact KL gradients along the unit direction; the
  // Hessian is linear in v so the normalization just conditions the stencil.
  constexpr double kEps = 1e-5;
  VectorXd unit = v / norm;
  VectorXd grad_plus = mean_kl_gradient(spec, params + kEps * unit, batch);
  VectorXd grad_minus = mean_kl_gradient(spec, params - kEps * unit, batch);
  VectorXd hv = (grad_plus - grad_minus) * (norm / (2.0 * kEps));
  if (!hv.allFinite()) throw NumericError("fisher_vector_product: non-finite product");
  return hv + damping * v;
}

namespace {

// Every fvp_subsample-th transition; enough signal for curvature while the
// gradient and line search stay exact.
TrajectoryBatch fvp_view(const TrajectoryBatch& batch, int stride) {
  if (stride <= 1) return batch;
  TrajectoryBatch sub;
  sub.spec = batch.spec;
  sub.episode_length = batch.episode_length;
  const int n = (batch.size() + stride - 1) / stride;
  sub.histories.resize(n, batch.histories.cols());
  sub.actions.resize(n, batch.actions.cols());
  sub.mean_old.resize(n, batch.mean_old.cols());
  sub.log_std_old = batch.log_std_old;
  for (int i = 0, j = 0; i < batch.size(); i += stride, ++j) {
    sub.histories.row(j) = batch.histories.row(i);
    sub.actions.row(j) = batch.actions.row(i);
    sub.mean_old.row(j) = batch.mean_old.row(i);
  }
  return sub;
}

}  // namespace

TrpoUpdateResult trpo_update(const PolicySpec& spec, const VectorXd& params,
                             const TrajectoryBatch& batch, const TrpoConfig& config) {
  TrpoUpdateResult result{params, {}};
  TrpoStats& stats = result.stats;

  try {
    VectorXd gradient = surrogate_gradient(spec, params, batch);
    if (!gradient.allFinite()) throw NumericError("trpo_update: non-finite gradient");
    if (gradient.norm() < 1e-12) {
      stats.note = "zero gradient; no update";
      return result;
    }

    TrajectoryBatch curvature_batch = fvp_view(batch, config.fvp_subsample);
    auto fvp = [&](const VectorXd& v) {
      return fisher_vector_product(spec, params, curvature_batch, v, config.cg_damping);
    };
    VectorXd step_dir = conjugate_gradient(fvp, gradient, config.cg_iterations, 1e-10);
    double shs = step_dir.dot(fvp(step_dir));
    if (!std::isfinite(shs) || shs <= 0.0)
      throw NumericError("trpo_update: bad curvature along step");

    VectorXd full_step = std::sqrt(2.0 * config.kl_bound / shs) * step_dir;
    stats.surrogate_before = surrogate_loss(spec, params, batch);

    double scale = 1.0;
    for (int k = 0; k <= config.max_backtracks; ++k, scale *= config.backtrack_ratio) {
      VectorXd candidate = params + scale * full_step;
      double surrogate = surrogate_loss(spec, candidate, batch);
      double kl = mean_kl(spec, candidate, batch);
      if (!std::isfinite(surrogate) || !std::isfinite(kl)) continue;
      if (surrogate - stats.surrogate_before > 0.0 && kl <= config.kl_bound) {
        result.params = candidate;
        stats.surrogate_after = surrogate;
        stats.kl = kl;
        stats.step_norm = (scale * full_step).norm();
        stats.backtracks = k;
        stats.accepted = true;
        return result;
      }
    }
    stats.backtracks = config.max_backtracks + 1;
    stats.note = "line search exhausted; no update";
  } catch (const NumericError& err) {
    stats.note = err.what();
  }
  return result;
}

}  // namespace swarm
