#include "swarm/sim.hpp"

#include <cmath>

namespace swarm {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kPenetrationTol = 1e-6;  // m
constexpr int kMaxResolvePasses = 8;
constexpr int kMaxPlacementAttempts = 10000;
}  // namespace

void SimConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(arena_width) || !positive(arena_height) || !positive(agent_radius) ||
      !positive(agent_mass) || !positive(moment_of_inertia) || !positive(wheel_offset) ||
      !positive(max_force) || !positive(control_dt))
    throw std::invalid_argument("sim config: lengths, mass, inertia and dt must be positive");
  if (linear_damping < 0.0 || angular_damping < 0.0)
    throw std::invalid_argument("sim config: damping must be non-negative");
  if (physics_substeps < 1) throw std::invalid_argument("sim config: physics_substeps >= 1");
  if (agent_count < 1) throw std::invalid_argument("sim config: agent_count >= 1");
  if (agent_radius >= std::min(arena_width, arena_height) / 4.0)
    throw std::invalid_argument("sim config: agent_radius must be < min(arena dims)/4");
}

double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;  // fmod can land exactly on 2pi after the add
  return w;
}

std::pair<double, double> relative_pose(const AgentState& observer, const Vec2& target) {
  Vec2 offset = target - observer.position;
  double distance = offset.norm();
  if (distance == 0.0) return {0.0, 0.0};
  double bearing = wrap_angle(std::atan2(offset.y(), offset.x()) - observer.orientation);
  return {distance, bearing};
}

WorldState reset_world(const SimConfig& config, const TaskSpec& task, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);

  WorldState world;
  world.arena_width = config.arena_width;
  world.arena_height = config.arena_height;
  world.agent_radius = config.agent_radius;
  if (task.is_link()) {
    auto [a, b] = spawn_pois(rng, config.arena_width, config.arena_height, task.link());
    world.pois = {a, b};
  }

  const double r = config.agent_radius;
  const double min_sep = 2.0 * r + 0.005;
  int attempts = 0;
  world.agents.reserve(config.agent_count);
  for (int i = 0; i < config.agent_count; ++i) {
    AgentState agent;
    for (;;) {
      if (++attempts > kMaxPlacementAttempts)
        throw PlacementError("reset_world: could not place agents without overlap "
                             "(arena too crowded)");
      agent.position.x() = rng.uniform(r, config.arena_width - r);
      agent.position.y() = rng.uniform(r, config.arena_height - r);
      bool clear = true;
      for (const auto& other : world.agents)
        if ((other.position - agent.position).norm() < min_sep) {
          clear = false;
          break;
        }
      if (clear) break;
    }
    agent.orientation = rng.uniform(0.0, kTwoPi);
    world.agents.push_back(agent);
  }
  return world;
}

WorldState resolve_collisions(const WorldState& world, const SimConfig& config) {
  WorldState out = world;
  auto& agents = out.agents;
  const int n = static_cast<int>(agents.size());
  const double r = config.agent_radius;
  const double contact = 2.0 * r;

  for (int pass = 0; pass < kMaxResolvePasses; ++pass) {
    double max_penetration = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double d = (agents[j].position - agents[i].position).norm();
        max_penetration = std::max(max_penetration, contact - d);
      }
    for (int i = 0; i < n; ++i) {
      const auto& a = agents[i];
      max_penetration = std::max(max_penetration, r - a.position.x());
      max_penetration = std::max(max_penetration, a.position.x() - (config.arena_width - r));
      max_penetration = std::max(max_penetration, r - a.position.y());
      max_penetration = std::max(max_penetration, a.position.y() - (config.arena_height - r));
    }
    if (max_penetration < kPenetrationTol) break;

    // Pairwise separation: split the overlap evenly and remove the closing
    // component of the relative velocity (inelastic, equal masses).
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        Vec2 delta = agents[j].position - agents[i].position;
        double d = delta.norm();
        double penetration = contact - d;
        if (penetration <= 0.0) continue;
        Vec2 normal = d > 1e-12 ? Vec2(delta / d) : Vec2(1.0, 0.0);
        agents[i].position -= 0.5 * penetration * normal;
        agents[j].position += 0.5 * penetration * normal;
        double vi = agents[i].linear_velocity.dot(normal);
        double vj = agents[j].linear_velocity.dot(normal);
        if (vi - vj > 0.0) {  // closing
          double shared = 0.5 * (vi + vj);
          agents[i].linear_velocity += (shared - vi) * normal;
          agents[j].linear_velocity += (shared - vj) * normal;
        }
      }

    // Wall clamp with the outward velocity component zeroed.
    for (auto& agent : agents) {
      if (agent.position.x() < r) {
        agent.position.x() = r;
        agent.linear_velocity.x() = std::max(agent.linear_velocity.x(), 0.0);
      } else if (agent.position.x() > config.arena_width - r) {
        agent.position.x() = config.arena_width - r;
        agent.linear_velocity.x() = std::min(agent.linear_velocity.x(), 0.0);
      }
      if (agent.position.y() < r) {
        agent.position.y() = r;
        agent.linear_velocity.y() = std::max(agent.linear_velocity.y(), 0.0);
      } else if (agent.position.y() > config.arena_height - r) {
        agent.position.y() = config.arena_height - r;
        agent.linear_velocity.y() = std::min(agent.linear_velocity.y(), 0.0);
      }
    }
  }
  return out;
}

WorldState step_world(const WorldState& world, const std::vector<MotorAction>& actions,
                      const SimConfig& config) {
  if (actions.size() != world.agents.size())
    throw std::invalid_argument("step_world: action count does not match agent count");

  WorldState out = world;
  const double dt = config.control_dt / config.physics_substeps;
  const double lin_decay = std::exp(-config.linear_damping * dt);
  const double ang_decay = std::exp(-config.angular_damping * dt);

  for (int sub = 0; sub < config.physics_substeps; ++sub) {
    for (std::size_t i = 0; i < out.agents.size(); ++i) {
      auto& agent = out.agents[i];
      double left = std::clamp(actions[i].left_force, -1.0, 1.0) * config.max_force;
      double right = std::clamp(actions[i].right_force, -1.0, 1.0) * config.max_force;

      Vec2 heading(std::cos(agent.orientation), std::sin(agent.orientation));
      Vec2 force = (left + right) * heading;
      double torque = (right - left) * config.wheel_offset;

      agent.linear_velocity = agent.linear_velocity * lin_decay + force / config.agent_mass * dt;
      agent.angular_velocity =
          agent.angular_velocity * ang_decay + torque / config.moment_of_inertia * dt;
      agent.position += agent.linear_velocity * dt;
      agent.orientation = wrap_angle(agent.orientation + agent.angular_velocity * dt);
    }
    out = resolve_collisions(out, config);
  }
  out.time_step = world.time_step + 1;
  return out;
}

}  // namespace swarm
