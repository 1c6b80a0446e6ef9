#pragma once

#include "swarm/protocols.hpp"
#include "swarm/rng.hpp"
#include "swarm/sim.hpp"

namespace swarm::test {

inline SimConfig default_sim(int agents = 10) {
  SimConfig config;
  config.agent_count = agents;
  return config;
}

/// Arbitrary world for observation/reward tests; agents may overlap, which the
/// histogram and reward code must tolerate.
inline WorldState random_world(Rng& rng, int agents, double arena = 1.0) {
  WorldState world;
  world.arena_width = arena;
  world.arena_height = arena;
  world.agent_radius = 0.02;
  for (int i = 0; i < agents; ++i) {
    AgentState a;
    a.position = Vec2(rng.uniform(0.02, arena - 0.02), rng.uniform(0.02, arena - 0.02));
    a.orientation = rng.uniform(0.0, 2.0 * M_PI);
    world.agents.push_back(a);
  }
  return world;
}

inline WorldState world_at(std::vector<Vec2> positions, double arena = 1.0) {
  WorldState world;
  world.arena_width = arena;
  world.arena_height = arena;
  world.agent_radius = 0.02;
  for (const auto& p : positions) {
    AgentState a;
    a.position = p;
    world.agents.push_back(a);
  }
  return world;
}

inline double kinetic_energy(const WorldState& world, const SimConfig& config) {
  double e = 0.0;
  for (const auto& a : world.agents)
    e += 0.5 * config.agent_mass * a.linear_velocity.squaredNorm() +
         0.5 * config.moment_of_inertia * a.angular_velocity * a.angular_velocity;
  return e;
}

}  // namespace swarm::test
