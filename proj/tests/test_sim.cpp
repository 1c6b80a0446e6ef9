#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "helpers.hpp"
#include "swarm/sim.hpp"

using namespace swarm;
using test::default_sim;

namespace {

std::vector<MotorAction> all_agents(int m, double left, double right) {
  return std::vector<MotorAction>(m, MotorAction{left, right});
}

bool worlds_identical(const WorldState& a, const WorldState& b) {
  if (a.agents.size() != b.agents.size() || a.time_step != b.time_step) return false;
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    if (a.agents[i].position != b.agents[i].position) return false;
    if (a.agents[i].orientation != b.agents[i].orientation) return false;
    if (a.agents[i].linear_velocity != b.agents[i].linear_velocity) return false;
    if (a.agents[i].angular_velocity != b.agents[i].angular_velocity) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("reset places ten non-overlapping agents at rest") {
  SimConfig config = default_sim(10);
  WorldState world = reset_world(config, TaskSpec::make_edge(), 7);
  REQUIRE(world.agents.size() == 10);
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    const auto& a = world.agents[i];
    CHECK(a.linear_velocity.norm() == 0.0);
    CHECK(a.angular_velocity == 0.0);
    CHECK(a.position.x() >= config.agent_radius);
    CHECK(a.position.x() <= config.arena_width - config.agent_radius);
    CHECK(a.orientation >= 0.0);
    CHECK(a.orientation < 2.0 * M_PI);
    for (std::size_t j = i + 1; j < world.agents.size(); ++j)
      CHECK((world.agents[j].position - a.position).norm() >= 2 * config.agent_radius + 0.005);
  }
}

TEST_CASE("reset is bitwise deterministic in the seed") {
  SimConfig config = default_sim(10);
  WorldState a = reset_world(config, TaskSpec::make_edge(), 1234);
  WorldState b = reset_world(config, TaskSpec::make_edge(), 1234);
  CHECK(worlds_identical(a, b));
  WorldState c = reset_world(config, TaskSpec::make_edge(), 1235);
  CHECK(!worlds_identical(a, c));
}

TEST_CASE("reset with a single agent needs no pairwise constraint") {
  SimConfig config = default_sim(1);
  WorldState world = reset_world(config, TaskSpec::make_edge(), 0);
  CHECK(world.agents.size() == 1);
}

TEST_CASE("reset fails with a placement error when the arena is overcrowded") {
  SimConfig config = default_sim(60);
  config.arena_width = 0.2;
  config.arena_height = 0.2;
  config.agent_radius = 0.02;
  CHECK_THROWS_AS(reset_world(config, TaskSpec::make_edge(), 3), PlacementError);
}

TEST_CASE("zero actions from rest leave the pose unchanged") {
  SimConfig config = default_sim(3);
  WorldState world = reset_world(config, TaskSpec::make_edge(), 5);
  WorldState next = step_world(world, all_agents(3, 0.0, 0.0), config);
  CHECK(next.time_step == world.time_step + 1);
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    CHECK(next.agents[i].position == world.agents[i].position);
    CHECK(next.agents[i].orientation == world.agents[i].orientation);
  }
}

TEST_CASE("equal motor forces drive straight along the heading") {
  SimConfig config = default_sim(1);
  WorldState world;
  world.agents.push_back({Vec2(0.5, 0.5), 0.7, Vec2::Zero(), 0.0});
  WorldState next = step_world(world, all_agents(1, 0.6, 0.6), config);
  Vec2 moved = next.agents[0].position - world.agents[0].position;
  CHECK(moved.norm() > 0.0);
  CHECK(next.agents[0].orientation == doctest::Approx(0.7).epsilon(1e-12));
  // displacement is parallel to the heading
  Vec2 heading(std::cos(0.7), std::sin(0.7));
  CHECK(std::abs(moved.x() * heading.y() - moved.y() * heading.x()) < 1e-15);
}

TEST_CASE("opposite motor forces spin in place, matching the discrete closed form") {
  SimConfig config = default_sim(1);
  const double c = 0.8;
  WorldState world;
  world.agents.push_back({Vec2(0.5, 0.5), 0.0, Vec2::Zero(), 0.0});

  const int steps = 4;
  WorldState current = world;
  for (int s = 0; s < steps; ++s) current = step_world(current, all_agents(1, -c, c), config);

  // net force is exactly zero, so the position never moves
  CHECK(current.agents[0].position == world.agents[0].position);

  // 1-DOF rotation under the same recurrence, summed in closed form:
  //   w_k = (tau*dt/I) * (1-q^k)/(1-q),  phi_n = dt * sum_k w_k,  q = exp(-damping*dt)
  const double dt = config.control_dt / config.physics_substeps;
  const double torque = 2.0 * c * config.max_force * config.wheel_offset;
  const double q = std::exp(-config.angular_damping * dt);
  const int n = steps * config.physics_substeps;
  const double unit = torque * dt / config.moment_of_inertia;
  const double omega_n = unit * (1.0 - std::pow(q, n)) / (1.0 - q);
  const double phi_n =
      unit * dt * (n - q * (1.0 - std::pow(q, n)) / (1.0 - q)) / (1.0 - q);

  CHECK(current.agents[0].angular_velocity == doctest::Approx(omega_n).epsilon(1e-12));
  CHECK(current.agents[0].orientation == doctest::Approx(wrap_angle(phi_n)).epsilon(1e-12));
  CHECK(current.agents[0].orientation > 0.0);
}

TEST_CASE("step rejects an action vector of the wrong length") {
  SimConfig config = default_sim(3);
  WorldState world = reset_world(config, TaskSpec::make_edge(), 5);
  CHECK_THROWS_AS(step_world(world, all_agents(2, 0.0, 0.0), config), std::invalid_argument);
}

TEST_CASE("non-overlapping agents pass through collision resolution untouched") {
  SimConfig config = default_sim(2);
  WorldState world = test::world_at({{0.4, 0.5}, {0.4 + 2 * 0.02 + 0.01, 0.5}});
  WorldState resolved = resolve_collisions(world, config);
  CHECK(resolved.agents[0].position == world.agents[0].position);
  CHECK(resolved.agents[1].position == world.agents[1].position);
}

TEST_CASE("head-on overlap splits symmetrically and kills the closing velocity") {
  SimConfig config = default_sim(2);
  WorldState world = test::world_at({{0.5, 0.5}, {0.5 + 0.036, 0.5}});  // 0.004 overlap
  world.agents[0].linear_velocity = Vec2(0.05, 0.0);
  world.agents[1].linear_velocity = Vec2(-0.05, 0.0);
  WorldState resolved = resolve_collisions(world, config);
  CHECK(resolved.agents[0].position.x() == doctest::Approx(0.5 - 0.002).epsilon(1e-12));
  CHECK(resolved.agents[1].position.x() == doctest::Approx(0.536 + 0.002).epsilon(1e-12));
  CHECK(resolved.agents[0].linear_velocity.x() == doctest::Approx(0.0));
  CHECK(resolved.agents[1].linear_velocity.x() == doctest::Approx(0.0));
}

TEST_CASE("agents outside the walls are clamped with the outward velocity zeroed") {
  SimConfig config = default_sim(1);
  WorldState world = test::world_at({{-0.01, 0.5}});
  world.agents[0].linear_velocity = Vec2(-0.1, 0.02);
  WorldState resolved = resolve_collisions(world, config);
  CHECK(resolved.agents[0].position.x() == config.agent_radius);
  CHECK(resolved.agents[0].linear_velocity.x() == 0.0);
  CHECK(resolved.agents[0].linear_velocity.y() == 0.02);

  // brute-force feasibility scan: the resolved state violates no wall bound
  for (const auto& agent : resolved.agents) {
    CHECK(agent.position.x() >= config.agent_radius);
    CHECK(agent.position.x() <= config.arena_width - config.agent_radius);
    CHECK(agent.position.y() >= config.agent_radius);
    CHECK(agent.position.y() <= config.arena_height - config.agent_radius);
  }
}

TEST_CASE("relative pose identities") {
  AgentState observer;
  observer.position = Vec2(0.0, 0.0);
  observer.orientation = 0.0;

  auto [d1, b1] = relative_pose(observer, Vec2(1.0, 0.0));
  CHECK(d1 == doctest::Approx(1.0));
  CHECK(b1 == doctest::Approx(0.0));

  auto [d2, b2] = relative_pose(observer, Vec2(0.0, 1.0));
  CHECK(d2 == doctest::Approx(1.0));
  CHECK(b2 == doctest::Approx(M_PI / 2));

  observer.position = Vec2(0.5, 0.5);
  observer.orientation = M_PI;
  auto [d3, b3] = relative_pose(observer, Vec2(0.5, 0.0));
  // independent route: atan2(-0.5, 0) - pi = -3pi/2, wrapped to pi/2
  CHECK(d3 == doctest::Approx(0.5));
  CHECK(b3 == doctest::Approx(wrap_angle(std::atan2(-0.5, 0.0) - M_PI)));
  CHECK(b3 == doctest::Approx(M_PI / 2));

  auto [d4, b4] = relative_pose(observer, observer.position);
  CHECK(d4 == 0.0);
  CHECK(b4 == 0.0);
}

TEST_CASE("stepping is deterministic and respects containment and non-penetration") {
  SimConfig config = default_sim(12);
  Rng rng(99);
  WorldState world = reset_world(config, TaskSpec::make_edge(), 42);
  WorldState replayed = reset_world(config, TaskSpec::make_edge(), 42);

  for (int t = 0; t < 40; ++t) {
    std::vector<MotorAction> actions;
    for (int i = 0; i < config.agent_count; ++i)
      actions.push_back({rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)});
    world = step_world(world, actions, config);
    replayed = step_world(replayed, actions, config);

    for (std::size_t i = 0; i < world.agents.size(); ++i) {
      const auto& p = world.agents[i].position;
      CHECK(p.x() >= config.agent_radius - 1e-12);
      CHECK(p.x() <= config.arena_width - config.agent_radius + 1e-12);
      CHECK(p.y() >= config.agent_radius - 1e-12);
      CHECK(p.y() <= config.arena_height - config.agent_radius + 1e-12);
      for (std::size_t j = i + 1; j < world.agents.size(); ++j) {
        double d = (world.agents[j].position - p).norm();
        CHECK(2 * config.agent_radius - d < 1e-6);
      }
    }
  }
  CHECK(worlds_identical(world, replayed));
}

TEST_CASE("kinetic energy is non-increasing without actuation") {
  SimConfig config = default_sim(6);
  Rng rng(7);
  WorldState world = reset_world(config, TaskSpec::make_edge(), 11);
  for (auto& agent : world.agents) {
    agent.linear_velocity = Vec2(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    agent.angular_velocity = rng.uniform(-2.0, 2.0);
  }
  double energy = test::kinetic_energy(world, config);
  for (int t = 0; t < 30; ++t) {
    world = step_world(world, all_agents(6, 0.0, 0.0), config);
    double next = test::kinetic_energy(world, config);
    CHECK(next <= energy + 1e-15);
    energy = next;
  }
}

TEST_CASE("relative pose is frame equivariant") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    AgentState observer;
    observer.position = Vec2(rng.uniform(0, 1), rng.uniform(0, 1));
    observer.orientation = rng.uniform(0, 2 * M_PI);
    Vec2 target(rng.uniform(0, 1), rng.uniform(0, 1));

    auto [d, b] = relative_pose(observer, target);

    // translation: distances and bearings both unchanged
    Vec2 shift(rng.uniform(-3, 3), rng.uniform(-3, 3));
    AgentState moved = observer;
    moved.position += shift;
    auto [dt_, bt] = relative_pose(moved, target + shift);
    CHECK(dt_ == doctest::Approx(d).epsilon(1e-9));
    CHECK(bt == doctest::Approx(b).epsilon(1e-9));

    // rotation about the arena center with the heading co-rotated
    double alpha = rng.uniform(0, 2 * M_PI);
    Eigen::Rotation2D<double> rot(alpha);
    Vec2 center(0.5, 0.5);
    AgentState spun = observer;
    spun.position = center + rot * (observer.position - center);
    spun.orientation = wrap_angle(observer.orientation + alpha);
    auto [dr, br] = relative_pose(spun, center + rot * (target - center));
    CHECK(dr == doctest::Approx(d).epsilon(1e-9));
    if (d > 1e-12) {
      double delta = std::remainder(br - b, 2 * M_PI);
      CHECK(std::abs(delta) < 1e-9);
    }
  }
}

}  // TEST_SUITE
