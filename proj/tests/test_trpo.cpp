#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "swarm/rng.hpp"
#include "swarm/rollout.hpp"
#include "swarm/trpo.hpp"

using namespace swarm;

namespace {

PolicySpec tiny_spec(int obs_dim = 3, int history = 2) {
  PolicySpec spec;
  spec.history_length = history;
  spec.obs_dim = obs_dim;
  spec.slot_hidden1 = 12;
  spec.slot_hidden2 = 6;
  spec.trunk_hidden = 8;
  return spec;
}

// Batch of sampled transitions under `params`, one trajectory per episode of
// the given length. Rewards default to random unless provided.
TrajectoryBatch synthetic_batch(const PolicySpec& spec, const VectorXd& params, int episodes,
                                int length, Rng& rng) {
  const int n = episodes * length;
  const int window = spec.history_length * spec.slot_input_dim();
  TrajectoryBatch batch;
  batch.spec = spec;
  batch.episode_length = length;
  batch.histories.resize(n, window);
  batch.actions.resize(n, spec.action_dim);
  batch.rewards.resize(n);
  batch.episode_returns = VectorXd::Zero(episodes);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < window; ++c) batch.histories(i, c) = rng.uniform(-1, 1);
    batch.rewards[i] = rng.uniform(-1, 1);
    batch.episode_ids.push_back(i / length);
    batch.agent_ids.push_back(0);
    batch.steps.push_back(i % length);
  }
  for (int e = 0; e < episodes; ++e) batch.segments.push_back({e * length, length, e, 0});

  batch.mean_old = policy_mean_batch(spec, params, batch.histories);
  VectorXd std = policy_std(spec, params);
  batch.log_std_old = std.array().log();
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < spec.action_dim; ++d)
      batch.actions(i, d) = batch.mean_old(i, d) + std[d] * rng.normal();

  MatrixXd z = (batch.actions - batch.mean_old).array().rowwise() / std.transpose().array();
  double log_norm = std.array().log().sum() + 0.5 * spec.action_dim * std::log(2 * M_PI);
  batch.logp_old = (-0.5 * z.array().square().rowwise().sum() - log_norm).matrix();
  return batch;
}

void prepare(TrajectoryBatch& batch, double discount = 0.99) {
  compute_returns(batch, discount);
  BaselineModel baseline = fit_baseline(batch);
  estimate_advantages(batch, baseline);
}

}  // namespace

TEST_SUITE("trpo") {

TEST_CASE("returns follow the discounted backward recursion") {
  PolicySpec spec = tiny_spec();
  Rng rng(1);
  TrajectoryBatch batch = synthetic_batch(spec, init_params(spec, 1), 1, 3, rng);

  batch.rewards << 1, 1, 1;
  compute_returns(batch, 1.0);
  CHECK(batch.returns[0] == 3.0);
  CHECK(batch.returns[1] == 2.0);
  CHECK(batch.returns[2] == 1.0);

  batch.rewards << 1, 0, 0;
  compute_returns(batch, 0.5);
  CHECK(batch.returns[0] == 1.0);
  CHECK(batch.returns[1] == 0.0);
  CHECK(batch.returns[2] == 0.0);

  batch.rewards << 0, 0, 1;
  compute_returns(batch, 0.5);
  CHECK(batch.returns[0] == 0.25);
  CHECK(batch.returns[1] == 0.5);
  CHECK(batch.returns[2] == 1.0);
}

TEST_CASE("returns match direct power-series summation") {
  PolicySpec spec = tiny_spec();
  Rng rng(2);
  TrajectoryBatch batch = synthetic_batch(spec, init_params(spec, 2), 4, 20, rng);
  const double gamma = 0.93;
  compute_returns(batch, gamma);

  for (const auto& seg : batch.segments)
    for (int t = 0; t < seg.length; ++t) {
      double direct = 0.0;
      for (int k = t; k < seg.length; ++k)
        direct += std::pow(gamma, k - t) * batch.rewards[seg.start + k];
      CHECK(batch.returns[seg.start + t] == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("baseline fits constants and realizable targets almost exactly") {
  // the fixed 1e-6 ridge biases the fit by O(lambda/N); use a production-sized
  // batch so the spec tolerances apply
  PolicySpec spec = tiny_spec();
  Rng rng(3);
  TrajectoryBatch batch = synthetic_batch(spec, init_params(spec, 3), 8, 1000, rng);

  batch.returns = VectorXd::Constant(batch.size(), 4.2);
  BaselineModel constant_fit = fit_baseline(batch);
  CHECK((baseline_predictions(batch, constant_fit).array() - 4.2).abs().maxCoeff() <= 1e-8);

  // returns exactly linear in the feature map are reproduced
  VectorXd truth = VectorXd::LinSpaced(spec.obs_dim + 3, -0.5, 0.7);
  BaselineModel truth_model{truth};
  batch.returns = baseline_predictions(batch, truth_model);
  BaselineModel fitted = fit_baseline(batch);
  CHECK((baseline_predictions(batch, fitted) - batch.returns).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("baseline never loses to the best constant predictor") {
  PolicySpec spec = tiny_spec();
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    TrajectoryBatch batch = synthetic_batch(spec, init_params(spec, 40 + trial), 3, 30, rng);
    compute_returns(batch, 0.99);
    BaselineModel model = fit_baseline(batch);
    double fit_error = (batch.returns - baseline_predictions(batch, model)).squaredNorm();
    double constant_error =
        (batch.returns.array() - batch.returns.mean()).square().sum();
    CHECK(fit_error <= constant_error + 1e-9);
  }
}

TEST_CASE("advantage normalization and its degenerate path") {
  PolicySpec spec = tiny_spec();
  Rng rng(5);
  TrajectoryBatch batch = synthetic_batch(spec, init_params(spec, 5), 4, 25, rng);
  compute_returns(batch, 0.99);

  // zero baseline: advantages are the normalized returns
  BaselineModel zero{VectorXd::Zero(spec.obs_dim + 3)};
  CHECK(estimate_advantages(batch, zero));
  const int n = batch.size();
  double mean = batch.advantages.mean();
  double std = std::sqrt((batch.advantages.array() - mean).square().sum() / (n - 1));
  CHECK(std::abs(mean) <= 1e-10);
  CHECK(std::abs(std - 1.0) <= 1e-10);
  VectorXd manual = batch.returns.array() - batch.returns.mean();
  manual /= std::sqrt(manual.squaredNorm() / (n - 1));
  CHECK((batch.advantages - manual).cwiseAbs().maxCoeff() <= 1e-9);

  // perfect baseline: no variance left, normalization is skipped
  batch.returns = baseline_predictions(batch, zero);  // all zeros
  CHECK(!estimate_advantages(batch, zero));
  CHECK(batch.advantages.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("surrogate is zero at the old parameters and linear in the advantages") {
  PolicySpec spec = tiny_spec();
  Rng rng(6);
  VectorXd params = init_params(spec, 6);
  TrajectoryBatch batch = synthetic_batch(spec, params, 4, 25, rng);
  prepare(batch);

  CHECK(surrogate_loss(spec, params, batch) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(surrogate_loss(spec, params, params, batch) == doctest::Approx(0.0).epsilon(1e-12));

  VectorXd other = params + 0.01 * init_params(spec, 7);
  double base = surrogate_loss(spec, other, batch);
  batch.advantages *= 3.0;
  CHECK(surrogate_loss(spec, other, batch) == doctest::Approx(3.0 * base).epsilon(1e-9));
}

TEST_CASE("surrogate gradient matches finite differences at and away from the snapshot") {
  PolicySpec spec = tiny_spec();
  Rng rng(7);
  for (int trial = 0; trial < 6; ++trial) {
    VectorXd params = init_params(spec, 70 + trial);
    TrajectoryBatch batch = synthetic_batch(spec, params, 2, 15, rng);
    prepare(batch);

    for (const VectorXd& at :
         {params, VectorXd(params + 0.02 * init_params(spec, 170 + trial))}) {
      VectorXd analytic = surrogate_gradient(spec, at, batch);
      VectorXd reference = test::fd_gradient(
          [&](const VectorXd& p) { return surrogate_loss(spec, p, batch); }, at);
      CHECK(test::gradient_error(analytic, reference) <= 1e-4);
    }
  }
}

TEST_CASE("mean kl gradient matches finite differences") {
  PolicySpec spec = tiny_spec();
  Rng rng(8);
  for (int trial = 0; trial < 6; ++trial) {
    VectorXd params = init_params(spec, 80 + trial);
    TrajectoryBatch batch = synthetic_batch(spec, params, 2, 15, rng);
    VectorXd at = params + 0.05 * init_params(spec, 180 + trial);

    VectorXd analytic = mean_kl_gradient(spec, at, batch);
    VectorXd reference =
        test::fd_gradient([&](const VectorXd& p) { return mean_kl(spec, p, batch); }, at);
    CHECK(test::gradient_error(analytic, reference) <= 1e-4);
    CHECK(mean_kl(spec, params, batch) == doctest::Approx(0.0));
  }
}

TEST_CASE("conjugate gradient solves identity and random spd systems") {
  VectorXd g = VectorXd::LinSpaced(20, -1.0, 1.0);
  auto identity = [](const VectorXd& v) { return v; };
  CHECK((conjugate_gradient(identity, g, 1, 1e-12) - g).norm() <= 1e-12);

  CHECK(conjugate_gradient(identity, VectorXd::Zero(20), 10, 1e-12).norm() == 0.0);

  // a damping floor mirrors how the solver is used on the damped kl hessian
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd base(20, 20);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) base(i, j) = rng.uniform(-1, 1);
    MatrixXd spd = base * base.transpose() + 2.0 * MatrixXd::Identity(20, 20);
    VectorXd rhs(20);
    for (int i = 0; i < 20; ++i) rhs[i] = rng.uniform(-1, 1);

    VectorXd direct = spd.ldlt().solve(rhs);
    VectorXd iterative =
        conjugate_gradient([&](const VectorXd& v) { return spd * v; }, rhs, 20, 1e-12);
    CHECK((iterative - direct).norm() <= 1e-6 * std::max(1.0, direct.norm()));
  }
}

TEST_CASE("fisher vector product is damped positive definite and matches the kl quadratic") {
  PolicySpec spec = tiny_spec();
  Rng rng(10);
  VectorXd params = init_params(spec, 10);
  TrajectoryBatch batch = synthetic_batch(spec, params, 2, 20, rng);
  const double damping = 0.1;

  CHECK(fisher_vector_product(spec, params, batch, VectorXd::Zero(params.size()), damping)
            .norm() == 0.0);

  for (int trial = 0; trial < 8; ++trial) {
    VectorXd v(params.size());
    for (int i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1, 1);
    VectorXd hv = fisher_vector_product(spec, params, batch, v, damping);
    CHECK(v.dot(hv) >= damping * v.squaredNorm() - 1e-6 * v.squaredNorm());

    // 0.5 v' H v == KL(theta, theta + eps v)/eps^2 up to curvature error
    VectorXd pure = hv - damping * v;
    const double eps = 1e-3;
    double quad = 0.5 * v.dot(pure) * eps * eps;
    double kl = mean_kl(spec, params + eps * v, batch);
    if (kl > 1e-12) CHECK(std::abs(quad - kl) <= 0.05 * kl);
  }
}

TEST_CASE("zero advantages produce a no-op update") {
  PolicySpec spec = tiny_spec();
  Rng rng(11);
  VectorXd params = init_params(spec, 11);
  TrajectoryBatch batch = synthetic_batch(spec, params, 2, 20, rng);
  batch.advantages = VectorXd::Zero(batch.size());

  TrpoConfig config;
  auto result = trpo_update(spec, params, batch, config);
  CHECK(result.params == params);
  CHECK(!result.stats.accepted);
}

TEST_CASE("accepted updates respect the trust region and improve the surrogate") {
  PolicySpec spec = tiny_spec();
  TrpoConfig config;
  Rng rng(12);
  int accepted = 0;
  for (int trial = 0; trial < 8; ++trial) {
    VectorXd params = init_params(spec, 120 + trial);
    TrajectoryBatch batch = synthetic_batch(spec, params, 3, 25, rng);
    prepare(batch);

    auto result = trpo_update(spec, params, batch, config);
    if (!result.stats.accepted) continue;
    ++accepted;
    CHECK(result.stats.kl <= 1.1 * config.kl_bound);
    CHECK(result.stats.surrogate_after > result.stats.surrogate_before);
    CHECK(mean_kl(spec, result.params, batch) <= 1.1 * config.kl_bound);
    CHECK(surrogate_loss(spec, result.params, params, batch) > 0.0);
  }
  CHECK(accepted >= 6);  // random-advantage batches should almost always step
}

TEST_CASE("one-step bandit converges to the known optimum") {
  PolicySpec spec;
  spec.history_length = 1;
  spec.obs_dim = 1;
  spec.slot_hidden1 = 8;
  spec.slot_hidden2 = 4;
  spec.trunk_hidden = 4;

  TrpoConfig config;
  config.episode_length = 1;

  const VectorXd target = (VectorXd(2) << 0.4, -0.3).finished();
  VectorXd params = init_params(spec, 2024);
  Rng rng(2025);

  HistoryWindow window(spec.history_length, spec.action_dim, spec.obs_dim);
  window.advance(VectorXd::Zero(2), VectorXd::Zero(1));
  const int samples = 256;

  for (int iteration = 0; iteration < 50; ++iteration) {
    TrajectoryBatch batch;
    batch.spec = spec;
    batch.episode_length = 1;
    batch.histories.resize(samples, window.flat().size());
    batch.actions.resize(samples, 2);
    batch.rewards.resize(samples);
    VectorXd std = policy_std(spec, params);
    batch.log_std_old = std.array().log();

    for (int s = 0; s < samples; ++s) {
      batch.histories.row(s) = window.flat().transpose();
      batch.episode_ids.push_back(s);
      batch.agent_ids.push_back(0);
      batch.steps.push_back(0);
      batch.segments.push_back({s, 1, s, 0});
    }
    batch.mean_old = policy_mean_batch(spec, params, batch.histories);
    for (int s = 0; s < samples; ++s) {
      for (int d = 0; d < 2; ++d)
        batch.actions(s, d) = batch.mean_old(s, d) + std[d] * rng.normal();
      batch.rewards[s] = -(batch.actions.row(s).transpose() - target).squaredNorm();
    }
    MatrixXd z = (batch.actions - batch.mean_old).array().rowwise() / std.transpose().array();
    double log_norm = std.array().log().sum() + std::log(2 * M_PI);
    batch.logp_old = (-0.5 * z.array().square().rowwise().sum() - log_norm).matrix();
    batch.episode_returns = batch.rewards;

    prepare(batch, 1.0);
    params = trpo_update(spec, params, batch, config).params;
  }

  GaussianAction final_policy = policy_forward(spec, params, window);
  CHECK((final_policy.mean - target).norm() <= 0.1);
}

TEST_CASE("rollout collection pools shared-reward transitions deterministically") {
  RolloutSetup setup;
  setup.sim = test::default_sim(3);
  setup.task = TaskSpec::make_edge();
  setup.protocol.mode = ObsMode::Joint2D;
  setup.policy.history_length = 2;
  setup.policy.obs_dim = observation_dim(setup.protocol, setup.task);
  setup.policy.slot_hidden1 = 16;
  setup.policy.slot_hidden2 = 8;
  setup.policy.trunk_hidden = 8;
  VectorXd params = init_params(setup.policy, 5);

  const int episodes = 2, length = 25, m = 3;
  TrajectoryBatch batch = collect_rollouts(setup, params, episodes, length, 99);
  CHECK(batch.size() == episodes * m * length);
  CHECK(static_cast<int>(batch.segments.size()) == episodes * m);

  // the global reward is recorded identically for every agent of a step, and
  // episode returns are the plain sums of step rewards
  for (int e = 0; e < episodes; ++e) {
    double episode_sum = 0.0;
    for (int t = 0; t < length; ++t) {
      double reward = batch.rewards[e * m * length + t];
      episode_sum += reward;
      for (int i = 1; i < m; ++i)
        CHECK(batch.rewards[e * m * length + i * length + t] == reward);
    }
    CHECK(batch.episode_returns[e] == doctest::Approx(episode_sum).epsilon(1e-12));
  }

  // log-densities snapshot the pre-clamp samples, and history action slots
  // hold the clamped executed commands
  VectorXd std = policy_std(setup.policy, params);
  for (int i = 0; i < batch.size(); i += 37) {
    GaussianAction dist{batch.mean_old.row(i).transpose(), std};
    CHECK(batch.logp_old[i] ==
          doctest::Approx(log_prob(dist, batch.actions.row(i).transpose())).epsilon(1e-12));
  }
  const int slot = setup.policy.slot_input_dim();
  for (int i = 0; i < batch.size(); ++i)
    for (int k = 0; k < setup.policy.history_length; ++k)
      for (int d = 0; d < 2; ++d) {
        double a = batch.histories(i, k * slot + d);
        CHECK(a >= -1.0);
        CHECK(a <= 1.0);
      }

  TrajectoryBatch replay = collect_rollouts(setup, params, episodes, length, 99);
  CHECK(batch.histories == replay.histories);
  CHECK(batch.actions == replay.actions);
  CHECK(batch.rewards == replay.rewards);

  TrajectoryBatch other = collect_rollouts(setup, params, episodes, length, 100);
  CHECK(batch.rewards != other.rewards);
}

TEST_CASE("pooled multi-agent transitions equal a relabeled single-agent stream") {
  PolicySpec spec = tiny_spec();
  Rng rng(13);
  VectorXd params = init_params(spec, 13);

  // six trajectories, interpreted either as 3 agents x 2 episodes or as one
  // agent with 6 episodes; identical row content and ordering
  TrajectoryBatch pooled = synthetic_batch(spec, params, 6, 15, rng);
  for (int i = 0; i < pooled.size(); ++i) {
    pooled.episode_ids[i] = i / (3 * 15);
    pooled.agent_ids[i] = (i / 15) % 3;
  }
  for (std::size_t s = 0; s < pooled.segments.size(); ++s) {
    pooled.segments[s].episode_id = static_cast<int>(s) / 3;
    pooled.segments[s].agent_id = static_cast<int>(s) % 3;
  }
  TrajectoryBatch stream = pooled;
  for (int i = 0; i < stream.size(); ++i) {
    stream.episode_ids[i] = i / 15;
    stream.agent_ids[i] = 0;
  }
  for (std::size_t s = 0; s < stream.segments.size(); ++s) {
    stream.segments[s].episode_id = static_cast<int>(s);
    stream.segments[s].agent_id = 0;
  }

  TrpoConfig config;
  prepare(pooled);
  prepare(stream);
  CHECK(pooled.returns == stream.returns);
  CHECK(pooled.advantages == stream.advantages);

  auto a = trpo_update(spec, params, pooled, config);
  auto b = trpo_update(spec, params, stream, config);
  CHECK(a.params == b.params);  // bit-equal
}

}  // TEST_SUITE
