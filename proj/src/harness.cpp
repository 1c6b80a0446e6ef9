#include "swarm/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace swarm {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& section,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("config: unknown key '" + item.key() + "' in section '" + section + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

SimConfig sim_from_json(const json& j) {
  require_keys(j, "sim",
               {"arena_width", "arena_height", "agent_radius", "agent_mass",
                "moment_of_inertia", "wheel_offset", "max_force", "linear_damping",
                "angular_damping", "control_dt", "physics_substeps", "agent_count"});
  SimConfig c;
  c.arena_width = get_or(j, "arena_width", c.arena_width);
  c.arena_height = get_or(j, "arena_height", c.arena_height);
  c.agent_radius = get_or(j, "agent_radius", c.agent_radius);
  c.agent_mass = get_or(j, "agent_mass", c.agent_mass);
  c.moment_of_inertia = get_or(j, "moment_of_inertia", c.moment_of_inertia);
  c.wheel_offset = get_or(j, "wheel_offset", c.wheel_offset);
  c.max_force = get_or(j, "max_force", c.max_force);
  c.linear_damping = get_or(j, "linear_damping", c.linear_damping);
  c.angular_damping = get_or(j, "angular_damping", c.angular_damping);
  c.control_dt = get_or(j, "control_dt", c.control_dt);
  c.physics_substeps = get_or(j, "physics_substeps", c.physics_substeps);
  c.agent_count = get_or(j, "agent_count", c.agent_count);
  return c;
}

ProtocolConfig protocol_from_json(const json& j) {
  require_keys(j, "protocol",
               {"comm_radius", "n_distance_bins", "n_bearing_bins", "mode", "sp_max_distance",
                "n_ir_sensors", "ir_range", "ir_fov"});
  ProtocolConfig c;
  c.comm_radius = get_or(j, "comm_radius", c.comm_radius);
  c.n_distance_bins = get_or(j, "n_distance_bins", c.n_distance_bins);
  c.n_bearing_bins = get_or(j, "n_bearing_bins", c.n_bearing_bins);
  if (j.contains("mode")) c.mode = obs_mode_from_string(j.at("mode").get<std::string>());
  c.sp_max_distance = get_or(j, "sp_max_distance", c.sp_max_distance);
  c.n_ir_sensors = get_or(j, "n_ir_sensors", c.n_ir_sensors);
  c.ir_range = get_or(j, "ir_range", c.ir_range);
  c.ir_fov = get_or(j, "ir_fov", c.ir_fov);
  return c;
}

TaskSpec task_from_json(const json& j) {
  require_keys(j, "task", {"variant", "edge", "link"});
  const std::string variant = get_or<std::string>(j, "variant", "edge");
  if (variant == "edge") {
    if (j.contains("link")) throw ConfigError("config: edge task with a 'link' section");
    EdgeParams p;
    if (j.contains("edge")) {
      const auto& e = j.at("edge");
      require_keys(e, "task.edge", {"reward_lo", "reward_hi", "penalty_hi", "penalty_weight"});
      p.reward_lo = get_or(e, "reward_lo", p.reward_lo);
      p.reward_hi = get_or(e, "reward_hi", p.reward_hi);
      p.penalty_hi = get_or(e, "penalty_hi", p.penalty_hi);
      p.penalty_weight = get_or(e, "penalty_weight", p.penalty_weight);
    }
    return TaskSpec::make_edge(p);
  }
  if (variant == "link") {
    if (j.contains("edge")) throw ConfigError("config: link task with an 'edge' section");
    LinkParams p;
    if (j.contains("link")) {
      const auto& l = j.at("link");
      require_keys(l, "task.link", {"min_separation", "spawn_margin"});
      p.min_separation = get_or(l, "min_separation", p.min_separation);
      p.spawn_margin = get_or(l, "spawn_margin", p.spawn_margin);
    }
    return TaskSpec::make_link(p);
  }
  throw ConfigError("config: task variant must be 'edge' or 'link'");
}

PolicySpec policy_from_json(const json& j) {
  require_keys(j, "policy",
               {"history_length", "slot_hidden1", "slot_hidden2", "trunk_hidden", "activation"});
  PolicySpec c;
  c.history_length = get_or(j, "history_length", c.history_length);
  c.slot_hidden1 = get_or(j, "slot_hidden1", c.slot_hidden1);
  c.slot_hidden2 = get_or(j, "slot_hidden2", c.slot_hidden2);
  c.trunk_hidden = get_or(j, "trunk_hidden", c.trunk_hidden);
  c.activation = get_or<std::string>(j, "activation", c.activation);
  return c;
}

TrpoConfig trpo_from_json(const json& j) {
  require_keys(j, "trpo",
               {"kl_bound", "discount", "cg_iterations", "cg_damping", "backtrack_ratio",
                "max_backtracks", "episodes_per_iteration", "iterations", "episode_length",
                "fvp_subsample"});
  TrpoConfig c;
  c.kl_bound = get_or(j, "kl_bound", c.kl_bound);
  c.discount = get_or(j, "discount", c.discount);
  c.cg_iterations = get_or(j, "cg_iterations", c.cg_iterations);
  c.cg_damping = get_or(j, "cg_damping", c.cg_damping);
  c.backtrack_ratio = get_or(j, "backtrack_ratio", c.backtrack_ratio);
  c.max_backtracks = get_or(j, "max_backtracks", c.max_backtracks);
  c.episodes_per_iteration = get_or(j, "episodes_per_iteration", c.episodes_per_iteration);
  c.iterations = get_or(j, "iterations", c.iterations);
  c.episode_length = get_or(j, "episode_length", c.episode_length);
  c.fvp_subsample = get_or(j, "fvp_subsample", c.fvp_subsample);
  return c;
}

}  // namespace

void RunConfig::validate() const {
  try {
    sim.validate();
    protocol.validate();
    trpo.validate();
    policy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (protocol.mode == ObsMode::ShortestPath2D && !task.is_link())
    throw ConfigError("config: observation mode 2dsp requires the link task");
  if (policy.obs_dim != observation_dim(protocol, task))
    throw ConfigError("config: policy obs_dim does not match protocol/task");
  if (policy.action_dim != 2)
    throw ConfigError("config: motor policies have two actions");

  double diagonal = std::hypot(sim.arena_width, sim.arena_height);
  if (protocol.sp_max_distance < diagonal)
    throw ConfigError("config: sp_max_distance must cover the arena diagonal");

  if (task.is_link()) {
    const auto& link = task.link();
    if (link.link_radius != protocol.comm_radius)
      throw ConfigError("config: link_radius must equal the protocol comm_radius");
    double usable = std::hypot(sim.arena_width - 2 * link.spawn_margin,
                               sim.arena_height - 2 * link.spawn_margin);
    if (usable <= link.min_separation)
      throw ConfigError("config: arena too small for the POI separation constraint");
  }
  if (eval_episodes < 1) throw ConfigError("config: eval_episodes >= 1");
}

RunConfig run_config_from_json(const json& doc) {
  require_keys(doc, "(top level)",
               {"task", "sim", "protocol", "policy", "trpo", "master_seed", "eval_episodes"});
  RunConfig config;
  if (doc.contains("task")) config.task = task_from_json(doc.at("task"));
  if (doc.contains("sim")) config.sim = sim_from_json(doc.at("sim"));
  if (doc.contains("protocol")) config.protocol = protocol_from_json(doc.at("protocol"));
  if (doc.contains("policy")) config.policy = policy_from_json(doc.at("policy"));
  if (doc.contains("trpo")) config.trpo = trpo_from_json(doc.at("trpo"));
  config.master_seed = get_or<std::uint64_t>(doc, "master_seed", 0);
  config.eval_episodes = get_or(doc, "eval_episodes", 20);

  // Resolved fields: the observation layout fixes the policy input width and
  // the link task shares the protocol's connectivity radius.
  if (config.task.is_link())
    std::get<LinkParams>(config.task.params).link_radius = config.protocol.comm_radius;
  try {
    config.policy.obs_dim = observation_dim(config.protocol, config.task);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  config.validate();
  return config;
}

json run_config_to_json(const RunConfig& config) {
  json task;
  if (config.task.is_edge()) {
    const auto& e = config.task.edge();
    task = {{"variant", "edge"},
            {"edge",
             {{"reward_lo", e.reward_lo},
              {"reward_hi", e.reward_hi},
              {"penalty_hi", e.penalty_hi},
              {"penalty_weight", e.penalty_weight}}}};
  } else {
    const auto& l = config.task.link();
    task = {{"variant", "link"},
            {"link",
             {{"min_separation", l.min_separation}, {"spawn_margin", l.spawn_margin}}}};
  }
  return {{"task", task},
          {"sim",
           {{"arena_width", config.sim.arena_width},
            {"arena_height", config.sim.arena_height},
            {"agent_radius", config.sim.agent_radius},
            {"agent_mass", config.sim.agent_mass},
            {"moment_of_inertia", config.sim.moment_of_inertia},
            {"wheel_offset", config.sim.wheel_offset},
            {"max_force", config.sim.max_force},
            {"linear_damping", config.sim.linear_damping},
            {"angular_damping", config.sim.angular_damping},
            {"control_dt", config.sim.control_dt},
            {"physics_substeps", config.sim.physics_substeps},
            {"agent_count", config.sim.agent_count}}},
          {"protocol",
           {{"comm_radius", config.protocol.comm_radius},
            {"n_distance_bins", config.protocol.n_distance_bins},
            {"n_bearing_bins", config.protocol.n_bearing_bins},
            {"mode", to_string(config.protocol.mode)},
            {"sp_max_distance", config.protocol.sp_max_distance},
            {"n_ir_sensors", config.protocol.n_ir_sensors},
            {"ir_range", config.protocol.ir_range},
            {"ir_fov", config.protocol.ir_fov}}},
          {"policy",
           {{"history_length", config.policy.history_length},
            {"slot_hidden1", config.policy.slot_hidden1},
            {"slot_hidden2", config.policy.slot_hidden2},
            {"trunk_hidden", config.policy.trunk_hidden},
            {"activation", config.policy.activation}}},
          {"trpo",
           {{"kl_bound", config.trpo.kl_bound},
            {"discount", config.trpo.discount},
            {"cg_iterations", config.trpo.cg_iterations},
            {"cg_damping", config.trpo.cg_damping},
            {"backtrack_ratio", config.trpo.backtrack_ratio},
            {"max_backtracks", config.trpo.max_backtracks},
            {"episodes_per_iteration", config.trpo.episodes_per_iteration},
            {"iterations", config.trpo.iterations},
            {"episode_length", config.trpo.episode_length},
            {"fvp_subsample", config.trpo.fvp_subsample}}},
          {"master_seed", config.master_seed},
          {"eval_episodes", config.eval_episodes}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return run_config_from_json(doc);
}

RolloutSetup rollout_setup(const RunConfig& config) {
  return {config.sim, config.task, config.protocol, config.policy};
}

namespace {

std::string format_csv_row(const IterationRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.mean_return,
                r.std_return, r.mean_kl, r.surrogate_improvement);
  return buf;
}

std::string checkpoint_name(int iteration) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checkpoint_%04d.bin", iteration);
  return buf;
}

}  // namespace

TrainResult run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                         const ProgressCallback& progress) {
  config.validate();
  std::filesystem::create_directories(out_dir);

  {
    std::ofstream frozen(out_dir / "resolved_config.json");
    if (!frozen) throw ConfigError("config: cannot write resolved config");
    frozen << run_config_to_json(config).dump(2) << "\n";
  }

  RolloutSetup setup = rollout_setup(config);
  TrainResult result;
  result.params = init_params(config.policy, mix_seed(config.master_seed, 0));
  save_checkpoint(out_dir / "checkpoint_init.bin", {config.policy, result.params});

  std::ofstream curve(out_dir / "learning_curve.csv");
  if (!curve) throw ConfigError("config: cannot write learning curve");
  curve << "iteration,mean_return,std_return,mean_kl,surrogate_improvement\n";
  curve.flush();

  for (int iter = 0; iter < config.trpo.iterations; ++iter) {
    auto t0 = std::chrono::steady_clock::now();
    TrajectoryBatch batch =
        collect_rollouts(setup, result.params, config.trpo.episodes_per_iteration,
                         config.trpo.episode_length, mix_seed(config.master_seed, 1 + iter));
    compute_returns(batch, config.trpo.discount);
    BaselineModel baseline = fit_baseline(batch);
    estimate_advantages(batch, baseline);
    TrpoUpdateResult update = trpo_update(config.policy, result.params, batch, config.trpo);

    if (!update.params.allFinite()) {
      save_checkpoint(out_dir / "checkpoint_abort.bin", {config.policy, result.params});
      throw NumericError("training aborted: non-finite parameters at iteration " +
                         std::to_string(iter));
    }
    result.params = update.params;

    IterationRecord record;
    record.iteration = iter;
    record.mean_return = batch.episode_returns.mean();
    if (batch.episode_returns.size() > 1) {
      double mean = record.mean_return;
      record.std_return = std::sqrt((batch.episode_returns.array() - mean).square().sum() /
                                    (batch.episode_returns.size() - 1));
    }
    record.mean_kl = update.stats.kl;
    record.surrogate_improvement =
        update.stats.accepted ? update.stats.surrogate_after - update.stats.surrogate_before : 0.0;
    record.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.records.push_back(record);

    curve << format_csv_row(record);
    curve.flush();
    std::fprintf(stderr,
                 "iter %4d  return %9.2f +- %7.2f  kl %.5f  improve %.5f  %s%s  %.1fs\n",
                 record.iteration, record.mean_return, record.std_return, record.mean_kl,
                 record.surrogate_improvement, update.stats.accepted ? "ok" : "no-op",
                 update.stats.note.empty() ? "" : (" (" + update.stats.note + ")").c_str(),
                 record.wall_clock_seconds);

    if ((iter + 1) % 10 == 0)
      save_checkpoint(out_dir / checkpoint_name(iter + 1), {config.policy, result.params});
    if (progress && progress(iter + 1, result.params)) break;
  }

  save_checkpoint(out_dir / "checkpoint_final.bin", {config.policy, result.params});
  return result;
}

EvalMetrics evaluate(const Checkpoint& checkpoint, const RunConfig& config, int n_episodes,
                     std::uint64_t seed) {
  config.validate();
  if (!(checkpoint.spec == config.policy))
    throw ConfigError("evaluate: checkpoint spec does not match the configuration");

  RolloutSetup setup = rollout_setup(config);
  EvalMetrics metrics;
  metrics.episodes = n_episodes;

  VectorXd returns(n_episodes);
  long total_steps = 0;
  long linked_steps = 0;
  double link_reward_sum = 0.0;
  long active_edges = 0;

  for (int e = 0; e < n_episodes; ++e) {
    auto sink = [&](const StepInfo& info) {
      ++total_steps;
      if (config.task.is_edge()) {
        active_edges += active_edge_count(info.world_after, config.task.edge());
      } else {
        if (info.reward > 0.0) ++linked_steps;  // reward is d_opt/d_sp > 0 iff linked
        link_reward_sum += info.reward;
      }
    };
    returns[e] = run_episode(setup, checkpoint.params, config.trpo.episode_length,
                             mix_seed(seed, 2 * e), mix_seed(seed, 2 * e + 1), false, sink);
  }

  metrics.mean_return = returns.mean();
  if (n_episodes > 1)
    metrics.std_return =
        std::sqrt((returns.array() - metrics.mean_return).square().sum() / (n_episodes - 1));
  if (total_steps > 0) {
    metrics.mean_active_edges = static_cast<double>(active_edges) / total_steps;
    metrics.link_established_fraction = static_cast<double>(linked_steps) / total_steps;
    metrics.mean_link_reward = link_reward_sum / total_steps;
  }
  return metrics;
}

void replay_dump(const Checkpoint& checkpoint, const RunConfig& config, std::uint64_t episode_seed,
                 const std::filesystem::path& out_path) {
  config.validate();
  if (!(checkpoint.spec == config.policy))
    throw ConfigError("replay: checkpoint spec does not match the configuration");

  std::ofstream out(out_path);
  if (!out) throw ConfigError("replay: cannot open " + out_path.string());

  RolloutSetup setup = rollout_setup(config);
  bool wrote_header = false;

  auto sink = [&](const StepInfo& info) {
    if (!wrote_header) {
      json pois = json::array();
      for (const auto& poi : info.world_after.pois) pois.push_back({poi.x(), poi.y()});
      json header = {{"schema", "swarm-replay"},
                     {"version", 1},
                     {"task", config.task.is_edge() ? "edge" : "link"},
                     {"mode", to_string(config.protocol.mode)},
                     {"agent_count", config.sim.agent_count},
                     {"episode_length", config.trpo.episode_length},
                     {"obs_dim", config.policy.obs_dim},
                     {"arena", {config.sim.arena_width, config.sim.arena_height}},
                     {"agent_radius", config.sim.agent_radius},
                     {"pois", pois},
                     {"episode_seed", episode_seed}};
      out << header.dump() << "\n";
      wrote_header = true;
    }
    for (int i = 0; i < config.sim.agent_count; ++i) {
      const auto& agent = info.world_after.agents[i];
      json obs = json::array();
      for (int d = 0; d < info.observations.cols(); ++d) obs.push_back(info.observations(i, d));
      json record = {{"t", info.t},
                     {"agent", i},
                     {"position", {agent.position.x(), agent.position.y()}},
                     {"orientation", agent.orientation},
                     {"action", {info.applied(i, 0), info.applied(i, 1)}},
                     {"reward", info.reward},
                     {"obs", obs}};
      out << record.dump() << "\n";
    }
  };
  run_episode(setup, checkpoint.params, config.trpo.episode_length, episode_seed,
              mix_seed(episode_seed, 1), false, sink);
}

}  // namespace swarm
