#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "swarm/harness.hpp"

namespace {

// Machine-readable failure report: category decides the exit code, the JSON
// line on stderr carries the details.
int fail(const std::string& category, const std::string& message) {
  nlohmann::json err = {{"error", {{"category", category}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
  if (category == "config") return 2;
  if (category == "placement") return 3;
  if (category == "numeric") return 4;
  if (category == "io") return 5;
  return 10;
}

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
  swarm::RunConfig config = swarm::load_run_config(config_path);
  if (seed) config.master_seed = *seed;
  swarm::run_training(config, out_dir);
  std::cout << "training complete; artifacts in " << out_dir << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& config_path, int episodes,
             std::uint64_t seed) {
  swarm::RunConfig config = swarm::load_run_config(config_path);
  swarm::Checkpoint checkpoint = swarm::load_checkpoint(checkpoint_path);
  if (episodes <= 0) episodes = config.eval_episodes;
  swarm::EvalMetrics metrics = swarm::evaluate(checkpoint, config, episodes, seed);

  nlohmann::json out = {{"episodes", metrics.episodes},
                        {"mean_return", metrics.mean_return},
                        {"std_return", metrics.std_return}};
  if (config.task.is_edge())
    out["mean_active_edges"] = metrics.mean_active_edges;
  else {
    out["link_established_fraction"] = metrics.link_established_fraction;
    out["mean_link_reward"] = metrics.mean_link_reward;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_replay(const std::string& checkpoint_path, const std::string& config_path,
               std::uint64_t seed, const std::string& out_path) {
  swarm::RunConfig config = swarm::load_run_config(config_path);
  swarm::Checkpoint checkpoint = swarm::load_checkpoint(checkpoint_path);
  swarm::replay_dump(checkpoint, config, seed, out_path);
  std::cout << "replay written to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swarmlab: decentralized swarm policy training and evaluation"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out_path;
  std::optional<std::uint64_t> seed_override;
  std::uint64_t seed = 0;
  int episodes = 20;

  auto* train = app.add_subcommand("train", "run the training loop");
  train->add_option("--config", config_path, "run configuration (JSON)")->required();
  train->add_option("--seed", seed_override, "override master_seed from the config");
  train->add_option("--out", out_path, "output directory")->default_val("out");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint deterministically");
  eval->add_option("--checkpoint", checkpoint_path, "policy checkpoint")->required();
  eval->add_option("--config", config_path, "run configuration (JSON)")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes (default: config eval_episodes)")
      ->default_val(0);
  eval->add_option("--seed", seed, "evaluation seed")->default_val(0);

  auto* replay = app.add_subcommand("replay", "dump one episode as JSONL");
  replay->add_option("--checkpoint", checkpoint_path, "policy checkpoint")->required();
  replay->add_option("--config", config_path, "run configuration (JSON)")->required();
  replay->add_option("--seed", seed, "episode seed")->default_val(0);
  replay->add_option("--out", out_path, "output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(config_path, seed_override, out_path);
    if (eval->parsed()) return run_eval(checkpoint_path, config_path, episodes, seed);
    if (replay->parsed()) return run_replay(checkpoint_path, config_path, seed, out_path);
  } catch (const swarm::ConfigError& e) {
    return fail("config", e.what());
  } catch (const swarm::PlacementError& e) {
    return fail("placement", e.what());
  } catch (const swarm::NumericError& e) {
    return fail("numeric", e.what());
  } catch (const swarm::CheckpointError& e) {
    return fail("io", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("config", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
