#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "swarm/tasks.hpp"

namespace swarm {

using Vec2 = Eigen::Vector2d;

/// Thrown when rejection sampling cannot place agents/points without overlap.
struct PlacementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  double arena_width = 1.0;        // m
  double arena_height = 1.0;       // m
  double agent_radius = 0.02;      // m
  double agent_mass = 0.05;        // kg
  double moment_of_inertia = 1e-5; // kg m^2
  double wheel_offset = 0.015;     // m, lateral distance of force application
  double max_force = 0.05;         // N
  double linear_damping = 5.0;     // 1/s
  double angular_damping = 5.0;    // 1/s
  double control_dt = 0.1;         // s
  int physics_substeps = 10;
  int agent_count = 10;

  void validate() const;
};

struct AgentState {
  Vec2 position = Vec2::Zero();
  double orientation = 0.0;  // wrapped to [0, 2pi)
  Vec2 linear_velocity = Vec2::Zero();
  double angular_velocity = 0.0;
};

struct WorldState {
  std::vector<AgentState> agents;
  std::vector<Vec2> pois;  // empty for the edge task, two for the link task
  long time_step = 0;
  // Environment geometry, copied from SimConfig at reset so observation code
  // can ray-cast against walls and agent bodies without a config in hand.
  double arena_width = 1.0;
  double arena_height = 1.0;
  double agent_radius = 0.02;
};

/// Normalized motor command; both components are clamped to [-1, 1] before the
/// force scale is applied.
struct MotorAction {
  double left_force = 0.0;
  double right_force = 0.0;
};

/// Wraps an angle into [0, 2pi).
double wrap_angle(double a);

/// Euclidean distance and egocentric bearing (world angle of the offset vector
/// minus the observer's heading, wrapped to [0, 2pi)). A target coincident with
/// the observer yields (0, 0).
std::pair<double, double> relative_pose(const AgentState& observer, const Vec2& target);

/// Samples a fresh world: agent positions uniform in the arena interior with
/// pairwise center distance >= 2r + 5mm (rejection sampled), orientations
/// uniform, velocities zero. Link-task POIs are spawned first. Throws
/// PlacementError after 10000 rejected draws.
WorldState reset_world(const SimConfig& config, const TaskSpec& task, std::uint64_t seed);

/// Advances the world one control step: per substep, applies left/right motor
/// forces (net thrust along heading, torque from the differential), integrates
/// with semi-implicit Euler and exponential velocity damping, then resolves
/// collisions. Throws std::invalid_argument on an action count mismatch.
WorldState step_world(const WorldState& world, const std::vector<MotorAction>& actions,
                      const SimConfig& config);

/// Projection-based contact resolution: overlapping pairs are pushed apart
/// along the center line (half the penetration each) with the closing normal
/// velocity removed, and agents are clamped inside the arena walls. Runs at
/// most 8 passes, stopping early once max penetration < 1e-6 m.
WorldState resolve_collisions(const WorldState& world, const SimConfig& config);

}  // namespace swarm
