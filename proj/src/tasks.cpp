#include "swarm/tasks.hpp"

#include <cmath>
#include <limits>
#include <queue>

#include "swarm/sim.hpp"

namespace swarm {

double edge_reward(const WorldState& world, const EdgeParams& params) {
  double reward = 0.0;
  const auto& agents = world.agents;
  for (std::size_t i = 0; i < agents.size(); ++i)
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      double d = (agents[j].position - agents[i].position).norm();
      if (d >= params.reward_lo && d <= params.reward_hi) reward += 1.0;
      if (d <= params.penalty_hi) reward -= params.penalty_weight;
    }
  return reward;
}

int active_edge_count(const WorldState& world, const EdgeParams& params) {
  int count = 0;
  const auto& agents = world.agents;
  for (std::size_t i = 0; i < agents.size(); ++i)
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      double d = (agents[j].position - agents[i].position).norm();
      if (d >= params.reward_lo && d <= params.reward_hi) ++count;
    }
  return count;
}

std::pair<Vec2, Vec2> spawn_pois(Rng& rng, double arena_width, double arena_height,
                                 const LinkParams& params) {
  const double m = params.spawn_margin;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Vec2 a(rng.uniform(m, arena_width - m), rng.uniform(m, arena_height - m));
    Vec2 b(rng.uniform(m, arena_width - m), rng.uniform(m, arena_height - m));
    if ((a - b).norm() > params.min_separation) return {a, b};
  }
  throw PlacementError("spawn_pois: separation constraint unsatisfiable in this arena");
}

CommGraph build_comm_graph(const WorldState& world, double link_radius) {
  const int m = static_cast<int>(world.agents.size());
  CommGraph graph;
  graph.node_count = 2 + m;
  graph.adjacency.resize(graph.node_count);

  auto node_pos = [&](int v) -> Vec2 {
    if (v == 0) return world.pois.at(0);
    if (v == 1) return world.pois.at(1);
    return world.agents[v - 2].position;
  };
  for (int u = 0; u < graph.node_count; ++u)
    for (int v = u + 1; v < graph.node_count; ++v) {
      double d = (node_pos(u) - node_pos(v)).norm();
      if (d <= link_radius) {
        graph.adjacency[u].emplace_back(v, d);
        graph.adjacency[v].emplace_back(u, d);
      }
    }
  return graph;
}

std::optional<double> shortest_link_length(const CommGraph& graph) {
  if (graph.node_count < 2) return std::nullopt;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(graph.node_count, kInf);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dist[0] = 0.0;
  queue.emplace(0.0, 0);
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    if (u == 1) return d;
    for (auto [v, w] : graph.adjacency[u])
      if (d + w < dist[v]) {
        dist[v] = d + w;
        queue.emplace(dist[v], v);
      }
  }
  return std::nullopt;
}

double link_reward(const WorldState& world, const LinkParams& params) {
  double d_opt = (world.pois.at(0) - world.pois.at(1)).norm();
  auto d_sp = shortest_link_length(build_comm_graph(world, params.link_radius));
  if (!d_sp) return 0.0;
  return d_opt / *d_sp;
}

double task_reward(const WorldState& world, const TaskSpec& task) {
  return task.is_edge() ? edge_reward(world, task.edge()) : link_reward(world, task.link());
}

}  // namespace swarm
