#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "swarm/rng.hpp"

namespace swarm {

using Vec2 = Eigen::Vector2d;

struct WorldState;

/// Formation objective: +1 per agent pair whose center distance falls in
/// [reward_lo, reward_hi], minus penalty_weight per pair closer than
/// penalty_hi. Both intervals are closed.
struct EdgeParams {
  double reward_lo = 0.10;    // m
  double reward_hi = 0.16;    // m
  double penalty_hi = 0.07;   // m, penalty interval is [0, penalty_hi]
  double penalty_weight = 5.0;
};

/// Connectivity objective between two points of interest. The POIs themselves
/// live in WorldState (they are resampled each episode); these parameters
/// control their spawning and the connectivity radius.
struct LinkParams {
  double min_separation = 0.75;  // m, POI spawn constraint (strict)
  double link_radius = 0.2;      // m, equals the protocol comm radius
  double spawn_margin = 0.05;    // m, POI distance from arena walls
};

struct TaskSpec {
  std::variant<EdgeParams, LinkParams> params;

  bool is_edge() const { return std::holds_alternative<EdgeParams>(params); }
  bool is_link() const { return std::holds_alternative<LinkParams>(params); }
  const EdgeParams& edge() const { return std::get<EdgeParams>(params); }
  const LinkParams& link() const { return std::get<LinkParams>(params); }

  static TaskSpec make_edge(EdgeParams p = {}) { return TaskSpec{p}; }
  static TaskSpec make_link(LinkParams p = {}) { return TaskSpec{p}; }
};

/// Undirected distance-weighted graph over {poi_a, poi_b} + agents, with an
/// edge wherever two nodes are within link_radius. Node 0 is poi_a, node 1 is
/// poi_b, node 2+i is agent i.
struct CommGraph {
  int node_count = 0;
  std::vector<std::vector<std::pair<int, double>>> adjacency;
};

double edge_reward(const WorldState& world, const EdgeParams& params);

/// Number of agent pairs currently inside the rewarded distance interval.
int active_edge_count(const WorldState& world, const EdgeParams& params);

/// Rejection-samples two POIs uniform in the arena (with spawn_margin) until
/// their separation exceeds min_separation. Throws PlacementError after 10000
/// attempts.
std::pair<Vec2, Vec2> spawn_pois(Rng& rng, double arena_width, double arena_height,
                                 const LinkParams& params);

CommGraph build_comm_graph(const WorldState& world, double link_radius);

/// Shortest weighted path length from poi_a to poi_b, or nullopt when the two
/// POIs are not connected through the agents.
std::optional<double> shortest_link_length(const CommGraph& graph);

/// d_opt / d_sp when a link exists, 0 otherwise; always in [0, 1].
double link_reward(const WorldState& world, const LinkParams& params);

/// Dispatches to the task's reward function.
double task_reward(const WorldState& world, const TaskSpec& task);

}  // namespace swarm
