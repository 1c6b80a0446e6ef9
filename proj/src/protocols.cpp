#include "swarm/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swarm {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

int bin_index(double value, double width, int n_bins) {
  int b = static_cast<int>(value / width);
  return std::min(b, n_bins - 1);  // closes the last bin
}
}  // namespace

ObsMode obs_mode_from_string(const std::string& name) {
  if (name == "sensor") return ObsMode::Sensor;
  if (name == "d") return ObsMode::Distance;
  if (name == "b") return ObsMode::Bearing;
  if (name == "1d") return ObsMode::Independent1D;
  if (name == "2d") return ObsMode::Joint2D;
  if (name == "2dsp") return ObsMode::ShortestPath2D;
  throw std::invalid_argument("unknown observation mode: " + name);
}

std::string to_string(ObsMode mode) {
  switch (mode) {
    case ObsMode::Sensor: return "sensor";
    case ObsMode::Distance: return "d";
    case ObsMode::Bearing: return "b";
    case ObsMode::Independent1D: return "1d";
    case ObsMode::Joint2D: return "2d";
    case ObsMode::ShortestPath2D: return "2dsp";
  }
  throw std::invalid_argument("unknown observation mode");
}

void ProtocolConfig::validate() const {
  if (comm_radius <= 0.0) throw std::invalid_argument("protocol: comm_radius must be positive");
  if (n_distance_bins < 1 || n_bearing_bins < 1)
    throw std::invalid_argument("protocol: bin counts must be >= 1");
  if (sp_max_distance <= 0.0)
    throw std::invalid_argument("protocol: sp_max_distance must be positive");
  if (n_ir_sensors < 0) throw std::invalid_argument("protocol: n_ir_sensors must be >= 0");
  if (ir_range <= 0.0 || ir_fov <= 0.0)
    throw std::invalid_argument("protocol: ir_range and ir_fov must be positive");
}

NeighborSet sense_neighbors(const WorldState& world, int agent_id,
                            const ProtocolConfig& config) {
  NeighborSet nbrs;
  const auto& self = world.agents.at(agent_id);
  for (int j = 0; j < static_cast<int>(world.agents.size()); ++j) {
    if (j == agent_id) continue;
    auto [distance, bearing] = relative_pose(self, world.agents[j].position);
    if (distance <= config.comm_radius)
      nbrs.relations.push_back({distance, bearing, j});
  }
  return nbrs;
}

int CountHistogram::total() const {
  int sum = 0;
  for (int c : counts) sum += c;
  return sum;
}

Eigen::VectorXd CountHistogram::normalized(int swarm_size) const {
  double denom = std::max(swarm_size - 1, 1);
  Eigen::VectorXd out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = counts[i] / denom;
  return out;
}

CountHistogram distance_histogram(const NeighborSet& nbrs, const ProtocolConfig& config) {
  CountHistogram hist;
  hist.rows = config.n_distance_bins;
  hist.cols = 1;
  hist.counts.assign(config.n_distance_bins, 0);
  const double width = config.comm_radius / config.n_distance_bins;
  for (const auto& rel : nbrs.relations)
    ++hist.counts[bin_index(rel.distance, width, config.n_distance_bins)];
  return hist;
}

CountHistogram bearing_histogram(const NeighborSet& nbrs, const ProtocolConfig& config) {
  CountHistogram hist;
  hist.rows = 1;
  hist.cols = config.n_bearing_bins;
  hist.counts.assign(config.n_bearing_bins, 0);
  const double width = kTwoPi / config.n_bearing_bins;
  for (const auto& rel : nbrs.relations)
    ++hist.counts[bin_index(rel.bearing, width, config.n_bearing_bins)];
  return hist;
}

CountHistogram joint_histogram(const NeighborSet& nbrs, const ProtocolConfig& config) {
  CountHistogram hist;
  hist.rows = config.n_distance_bins;
  hist.cols = config.n_bearing_bins;
  hist.counts.assign(hist.rows * hist.cols, 0);
  const double d_width = config.comm_radius / config.n_distance_bins;
  const double b_width = kTwoPi / config.n_bearing_bins;
  for (const auto& rel : nbrs.relations) {
    int di = bin_index(rel.distance, d_width, config.n_distance_bins);
    int bi = bin_index(rel.bearing, b_width, config.n_bearing_bins);
    ++hist.counts[di * hist.cols + bi];
  }
  return hist;
}

namespace {

// Nearest non-negative intersection of ray (origin, dir) with the circle at
// `center`, or infinity if the ray misses. An origin inside the circle reads
// as an immediate hit.
double ray_circle_distance(const Vec2& origin, const Vec2& dir, const Vec2& center,
                           double radius) {
  Vec2 oc = origin - center;
  double c = oc.squaredNorm() - radius * radius;
  if (c <= 0.0) return 0.0;
  double b = oc.dot(dir);
  double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : std::numeric_limits<double>::infinity();
}

// Distance along the ray to the arena boundary (the agent is inside, so the
// ray always exits through one of the four walls).
double ray_wall_distance(const Vec2& origin, const Vec2& dir, double width, double height) {
  double t_exit = kNoEstimate;
  if (dir.x() > 0.0) t_exit = std::min(t_exit, (width - origin.x()) / dir.x());
  if (dir.x() < 0.0) t_exit = std::min(t_exit, -origin.x() / dir.x());
  if (dir.y() > 0.0) t_exit = std::min(t_exit, (height - origin.y()) / dir.y());
  if (dir.y() < 0.0) t_exit = std::min(t_exit, -origin.y() / dir.y());
  return t_exit;
}

}  // namespace

std::vector<double> ir_sensor_readings(const WorldState& world, int agent_id,
                                       const ProtocolConfig& config) {
  const auto& self = world.agents.at(agent_id);
  std::vector<double> readings(config.n_ir_sensors, 0.0);
  for (int s = 0; s < config.n_ir_sensors; ++s) {
    double offset = -config.ir_fov / 2.0 + (s + 0.5) * config.ir_fov / config.n_ir_sensors;
    double angle = self.orientation + offset;
    Vec2 dir(std::cos(angle), std::sin(angle));

    double hit = ray_wall_distance(self.position, dir, world.arena_width, world.arena_height);
    for (int j = 0; j < static_cast<int>(world.agents.size()); ++j) {
      if (j == agent_id) continue;
      hit = std::min(hit, ray_circle_distance(self.position, dir, world.agents[j].position,
                                              world.agent_radius));
    }
    readings[s] = 1.0 - std::min(hit, config.ir_range) / config.ir_range;
  }
  return readings;
}

ShortestPathEstimates propagate_shortest_path(const WorldState& world,
                                              const ShortestPathEstimates& prev, const Vec2& poi,
                                              const ProtocolConfig& config) {
  const int m = static_cast<int>(world.agents.size());
  if (static_cast<int>(prev.size()) != m)
    throw std::invalid_argument("propagate_shortest_path: estimate count != agent count");

  ShortestPathEstimates next(m, kNoEstimate);
  for (int i = 0; i < m; ++i) {
    double best = kNoEstimate;
    double direct = (world.agents[i].position - poi).norm();
    if (direct <= config.comm_radius) best = direct;
    for (int j = 0; j < m; ++j) {
      if (j == i || prev[j] == kNoEstimate) continue;
      double hop = (world.agents[i].position - world.agents[j].position).norm();
      if (hop <= config.comm_radius) best = std::min(best, prev[j] + hop);
    }
    next[i] = best;
  }
  return next;
}

ShortestPathPartition shortest_path_partition(const NeighborSet& nbrs,
                                              const ShortestPathEstimates& estimates,
                                              const ProtocolConfig& config) {
  const int cells = config.n_distance_bins * config.n_bearing_bins;
  const double d_width = config.comm_radius / config.n_distance_bins;
  const double b_width = kTwoPi / config.n_bearing_bins;

  std::vector<double> cell_min(cells, kNoEstimate);
  for (const auto& rel : nbrs.relations) {
    double estimate = estimates.at(rel.neighbor_id);
    if (estimate == kNoEstimate) continue;
    int di = bin_index(rel.distance, d_width, config.n_distance_bins);
    int bi = bin_index(rel.bearing, b_width, config.n_bearing_bins);
    int cell = di * config.n_bearing_bins + bi;
    cell_min[cell] = std::min(cell_min[cell], estimate);
  }

  ShortestPathPartition partition;
  partition.cells = Eigen::VectorXd::Zero(cells);
  for (int c = 0; c < cells; ++c) {
    if (cell_min[c] == kNoEstimate) continue;
    double v = std::min(cell_min[c], config.sp_max_distance);
    partition.cells[c] = (config.sp_max_distance - v) / config.sp_max_distance;
  }
  return partition;
}

int observation_dim(const ProtocolConfig& config, const TaskSpec& task) {
  const int joint = config.n_distance_bins * config.n_bearing_bins;
  int dim = config.n_ir_sensors;
  switch (config.mode) {
    case ObsMode::Sensor: break;
    case ObsMode::Distance: dim += config.n_distance_bins; break;
    case ObsMode::Bearing: dim += config.n_bearing_bins; break;
    case ObsMode::Independent1D: dim += config.n_distance_bins + config.n_bearing_bins; break;
    case ObsMode::Joint2D: dim += joint; break;
    case ObsMode::ShortestPath2D:
      if (!task.is_link())
        throw std::invalid_argument("observation mode 2dsp requires the link task");
      dim += joint + 2 * joint;
      break;
  }
  return dim;
}

Eigen::VectorXd assemble_observation(const WorldState& world, int agent_id,
                                     const std::vector<ShortestPathEstimates>& estimates,
                                     const ProtocolConfig& config, const TaskSpec& task) {
  const int dim = observation_dim(config, task);
  const int swarm_size = static_cast<int>(world.agents.size());
  Eigen::VectorXd obs(dim);

  auto ir = ir_sensor_readings(world, agent_id, config);
  for (int s = 0; s < config.n_ir_sensors; ++s) obs[s] = ir[s];
  int at = config.n_ir_sensors;

  NeighborSet nbrs = sense_neighbors(world, agent_id, config);
  auto put = [&](const Eigen::VectorXd& v) {
    obs.segment(at, v.size()) = v;
    at += static_cast<int>(v.size());
  };

  switch (config.mode) {
    case ObsMode::Sensor:
      break;
    case ObsMode::Distance:
      put(distance_histogram(nbrs, config).normalized(swarm_size));
      break;
    case ObsMode::Bearing:
      put(bearing_histogram(nbrs, config).normalized(swarm_size));
      break;
    case ObsMode::Independent1D:
      put(distance_histogram(nbrs, config).normalized(swarm_size));
      put(bearing_histogram(nbrs, config).normalized(swarm_size));
      break;
    case ObsMode::Joint2D:
      put(joint_histogram(nbrs, config).normalized(swarm_size));
      break;
    case ObsMode::ShortestPath2D: {
      if (estimates.size() != world.pois.size())
        throw std::invalid_argument("assemble_observation: one estimate vector per POI required");
      put(joint_histogram(nbrs, config).normalized(swarm_size));
      for (const auto& poi_estimates : estimates)
        put(shortest_path_partition(nbrs, poi_estimates, config).cells);
      break;
    }
  }
  return obs;
}

}  // namespace swarm
