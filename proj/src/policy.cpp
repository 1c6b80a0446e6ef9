#include "swarm/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "swarm/rng.hpp"

namespace swarm {

void PolicySpec::validate() const {
  if (history_length < 1) throw std::invalid_argument("policy: history_length >= 1");
  if (obs_dim < 1 || action_dim < 1) throw std::invalid_argument("policy: dims must be >= 1");
  if (slot_hidden1 < 1 || slot_hidden2 < 1 || trunk_hidden < 1)
    throw std::invalid_argument("policy: layer sizes must be >= 1");
  if (activation != "tanh") throw std::invalid_argument("policy: unsupported activation");
}

ParamLayout::ParamLayout(const PolicySpec& spec) {
  in = spec.slot_input_dim();
  h1 = spec.slot_hidden1;
  h2 = spec.slot_hidden2;
  concat = spec.history_length * h2;
  trunk = spec.trunk_hidden;
  out = spec.action_dim;

  w1 = 0;
  b1 = w1 + h1 * in;
  w2 = b1 + h1;
  b2 = w2 + h2 * h1;
  w3 = b2 + h2;
  b3 = w3 + trunk * concat;
  w4 = b3 + trunk;
  b4 = w4 + out * trunk;
  log_std = b4 + out;
  total = log_std + out;
}

int param_count(const PolicySpec& spec) { return ParamLayout(spec).total; }

namespace {

using ConstMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using Map = Eigen::Map<MatrixXd>;
using VecMap = Eigen::Map<VectorXd>;

struct Weights {
  ConstMap w1, w2, w3, w4;
  ConstVecMap b1, b2, b3, b4, log_std;

  Weights(const VectorXd& p, const ParamLayout& l)
      : w1(p.data() + l.w1, l.h1, l.in),
        w2(p.data() + l.w2, l.h2, l.h1),
        w3(p.data() + l.w3, l.trunk, l.concat),
        w4(p.data() + l.w4, l.out, l.trunk),
        b1(p.data() + l.b1, l.h1),
        b2(p.data() + l.b2, l.h2),
        b3(p.data() + l.b3, l.trunk),
        b4(p.data() + l.b4, l.out),
        log_std(p.data() + l.log_std, l.out) {}
};

}  // namespace

VectorXd init_params(const PolicySpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamLayout layout(spec);
  VectorXd params = VectorXd::Zero(layout.total);
  Rng rng(seed);

  auto fill = [&](int offset, int rows, int cols) {
    double scale = 1.0 / std::sqrt(static_cast<double>(cols));  // cols = fan-in
    for (int i = 0; i < rows * cols; ++i) params[offset + i] = scale * rng.normal();
  };
  fill(layout.w1, layout.h1, layout.in);
  fill(layout.w2, layout.h2, layout.h1);
  fill(layout.w3, layout.trunk, layout.concat);
  fill(layout.w4, layout.out, layout.trunk);
  params.segment(layout.log_std, layout.out).setConstant(std::log(0.5));
  return params;
}

HistoryWindow::HistoryWindow(int history_length, int action_dim, int obs_dim)
    : slots_(history_length),
      slot_dim_(action_dim + obs_dim),
      action_dim_(action_dim),
      obs_dim_(obs_dim),
      data_(VectorXd::Zero(history_length * (action_dim + obs_dim))) {}

void HistoryWindow::reset() { data_.setZero(); }

void HistoryWindow::advance(const VectorXd& prev_action, const VectorXd& obs) {
  if (prev_action.size() != action_dim_ || obs.size() != obs_dim_)
    throw std::invalid_argument("history window: slot dimension mismatch");
  const int tail = (slots_ - 1) * slot_dim_;
  if (tail > 0) data_.head(tail) = data_.tail(tail).eval();
  data_.segment(tail, action_dim_) = prev_action;
  data_.segment(tail + action_dim_, obs_dim_) = obs;
}

double log_prob(const GaussianAction& dist, const VectorXd& action) {
  double lp = 0.0;
  for (int i = 0; i < action.size(); ++i) {
    double z = (action[i] - dist.mean[i]) / dist.std[i];
    lp += -0.5 * z * z - std::log(dist.std[i]) - 0.5 * std::log(2.0 * M_PI);
  }
  return lp;
}

double kl_divergence(const GaussianAction& dist_old, const GaussianAction& dist_new) {
  double kl = 0.0;
  for (int i = 0; i < dist_old.mean.size(); ++i) {
    double so = dist_old.std[i], sn = dist_new.std[i];
    double dm = dist_old.mean[i] - dist_new.mean[i];
    kl += std::log(sn / so) + (so * so + dm * dm) / (2.0 * sn * sn) - 0.5;
  }
  return kl;
}

MatrixXd policy_mean_batch(const PolicySpec& spec, const VectorXd& params,
                           const MatrixXd& histories, PolicyCache* cache) {
  ParamLayout layout(spec);
  if (params.size() != layout.total)
    throw std::invalid_argument("policy: parameter vector has the wrong size");
  if (histories.cols() != spec.history_length * layout.in)
    throw std::invalid_argument("policy: history matrix has the wrong width");
  Weights w(params, layout);

  const int n = static_cast<int>(histories.rows());
  const int eta = spec.history_length;

  // Slot-major view: row n*eta+k holds slot k of sample n.
  MatrixXd slot_in(n * eta, layout.in);
  for (int k = 0; k < eta; ++k)
    for (int s = 0; s < n; ++s)
      slot_in.row(s * eta + k) = histories.row(s).segment(k * layout.in, layout.in);

  MatrixXd h1 = ((slot_in * w.w1.transpose()).rowwise() + w.b1.transpose()).array().tanh();
  MatrixXd h2 = ((h1 * w.w2.transpose()).rowwise() + w.b2.transpose()).array().tanh();

  MatrixXd concat(n, layout.concat);
  for (int k = 0; k < eta; ++k)
    for (int s = 0; s < n; ++s)
      concat.row(s).segment(k * layout.h2, layout.h2) = h2.row(s * eta + k);

  MatrixXd trunk = ((concat * w.w3.transpose()).rowwise() + w.b3.transpose()).array().tanh();
  MatrixXd mean = (trunk * w.w4.transpose()).rowwise() + w.b4.transpose();

  if (cache) {
    cache->slot_in = std::move(slot_in);
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->concat = std::move(concat);
    cache->trunk = std::move(trunk);
  }
  return mean;
}

GaussianAction policy_forward(const PolicySpec& spec, const VectorXd& params,
                              const HistoryWindow& history) {
  MatrixXd mean = policy_mean_batch(spec, params, history.flat().transpose());
  return {mean.row(0).transpose(), policy_std(spec, params)};
}

VectorXd policy_backward(const PolicySpec& spec, const VectorXd& params, const PolicyCache& cache,
                         const MatrixXd& d_mean, const VectorXd& d_log_std) {
  ParamLayout layout(spec);
  Weights w(params, layout);
  const int n = static_cast<int>(d_mean.rows());
  const int eta = spec.history_length;

  VectorXd grad = VectorXd::Zero(layout.total);
  Map g_w1(grad.data() + layout.w1, layout.h1, layout.in);
  Map g_w2(grad.data() + layout.w2, layout.h2, layout.h1);
  Map g_w3(grad.data() + layout.w3, layout.trunk, layout.concat);
  Map g_w4(grad.data() + layout.w4, layout.out, layout.trunk);
  VecMap g_b1(grad.data() + layout.b1, layout.h1);
  VecMap g_b2(grad.data() + layout.b2, layout.h2);
  VecMap g_b3(grad.data() + layout.b3, layout.trunk);
  VecMap g_b4(grad.data() + layout.b4, layout.out);

  // Output layer (linear).
  g_w4 = d_mean.transpose() * cache.trunk;
  g_b4 = d_mean.colwise().sum().transpose();

  // Trunk layer.
  MatrixXd d_trunk_pre =
      (d_mean * w.w4).array() * (1.0 - cache.trunk.array().square());
  g_w3 = d_trunk_pre.transpose() * cache.concat;
  g_b3 = d_trunk_pre.colwise().sum().transpose();

  // Back to the per-slot codes.
  MatrixXd d_concat = d_trunk_pre * w.w3;
  MatrixXd d_h2(n * eta, layout.h2);
  for (int k = 0; k < eta; ++k)
    for (int s = 0; s < n; ++s)
      d_h2.row(s * eta + k) = d_concat.row(s).segment(k * layout.h2, layout.h2);

  MatrixXd d_h2_pre = d_h2.array() * (1.0 - cache.h2.array().square());
  g_w2 = d_h2_pre.transpose() * cache.h1;
  g_b2 = d_h2_pre.colwise().sum().transpose();

  MatrixXd d_h1_pre =
      (d_h2_pre * w.w2).array() * (1.0 - cache.h1.array().square());
  g_w1 = d_h1_pre.transpose() * cache.slot_in;
  g_b1 = d_h1_pre.colwise().sum().transpose();

  grad.segment(layout.log_std, layout.out) = d_log_std;
  return grad;
}

VectorXd policy_std(const PolicySpec& spec, const VectorXd& params) {
  ParamLayout layout(spec);
  return params.segment(layout.log_std, layout.out).array().exp();
}

}  // namespace swarm
