#pragma once

#include <Eigen/Core>
#include <limits>
#include <string>
#include <vector>

#include "swarm/sim.hpp"

namespace swarm {

/// Observation composition fed to the policy.
enum class ObsMode {
  Sensor,           // IR readings only
  Distance,         // + 1D distance histogram
  Bearing,          // + 1D bearing histogram
  Independent1D,    // + distance and bearing histograms side by side
  Joint2D,          // + 2D joint histogram
  ShortestPath2D,   // + joint histogram and one shortest-path partition per POI
};

ObsMode obs_mode_from_string(const std::string& name);
std::string to_string(ObsMode mode);

struct ProtocolConfig {
  double comm_radius = 0.2;      // m, closed boundary: neighbors at exactly r count
  int n_distance_bins = 4;
  int n_bearing_bins = 8;
  ObsMode mode = ObsMode::Joint2D;
  double sp_max_distance = 1.5;  // m, encoding cap; at least the arena diagonal
  int n_ir_sensors = 4;
  double ir_range = 0.05;        // m
  double ir_fov = M_PI / 2.0;    // rad, centered on the heading

  void validate() const;
};

struct NeighborRelation {
  double distance = 0.0;
  double bearing = 0.0;  // egocentric, [0, 2pi)
  int neighbor_id = -1;
};

/// All other agents within comm_radius of the observer, with egocentric
/// distance/bearing. Ordered by agent id; the observer itself never appears.
struct NeighborSet {
  std::vector<NeighborRelation> relations;

  int size() const { return static_cast<int>(relations.size()); }
};

/// Raw neighbor counts over equal-width bins. Half-open bins with the last bin
/// closed above, so a neighbor at exactly comm_radius (or bearing 2pi-eps)
/// lands in the final bin.
struct CountHistogram {
  std::vector<int> counts;  // row-major for the joint case: distance x bearing
  int rows = 0;             // distance bins (1 for the bearing-only histogram)
  int cols = 0;             // bearing bins (1 for the distance-only histogram)

  int total() const;

  /// Counts scaled by 1/(swarm_size - 1), the bounded network-input encoding.
  Eigen::VectorXd normalized(int swarm_size) const;
};

/// Distance-to-POI estimates, one entry per agent. Infinity means "no estimate
/// yet" (the UNKNOWN sentinel); finite values never underestimate the true
/// communication-graph distance.
constexpr double kNoEstimate = std::numeric_limits<double>::infinity();
using ShortestPathEstimates = std::vector<double>;

/// distance x bearing grid of encoded minimum neighbor estimates, in [0, 1].
/// 0 means no informative neighbor in that cell; larger means a shorter path
/// to the POI runs through an agent there.
struct ShortestPathPartition {
  Eigen::VectorXd cells;  // row-major, n_distance_bins * n_bearing_bins
};

NeighborSet sense_neighbors(const WorldState& world, int agent_id, const ProtocolConfig& config);

CountHistogram distance_histogram(const NeighborSet& nbrs, const ProtocolConfig& config);
CountHistogram bearing_histogram(const NeighborSet& nbrs, const ProtocolConfig& config);
CountHistogram joint_histogram(const NeighborSet& nbrs, const ProtocolConfig& config);

/// Ray-cast IR readings: n_ir_sensors rays at equally spaced body-frame angles
/// across ir_fov (bin centers, so a single sensor points straight ahead).
/// Reading = 1 - hit_distance/ir_range against the nearest agent circle or
/// wall, 0 when nothing is in range.
std::vector<double> ir_sensor_readings(const WorldState& world, int agent_id,
                                       const ProtocolConfig& config);

/// One synchronous message round: each agent takes the minimum of its direct
/// POI observation (when within comm_radius) and every neighbor's previous
/// estimate plus the hop distance. UNKNOWN absorbs.
ShortestPathEstimates propagate_shortest_path(const WorldState& world,
                                              const ShortestPathEstimates& prev, const Vec2& poi,
                                              const ProtocolConfig& config);

/// Per cell, the minimum estimate among neighbors located there, encoded as
/// (sp_max_distance - min(v, sp_max_distance)) / sp_max_distance.
ShortestPathPartition shortest_path_partition(const NeighborSet& nbrs,
                                              const ShortestPathEstimates& estimates,
                                              const ProtocolConfig& config);

/// Feature dimension for a given protocol/task pairing; constant in the swarm
/// size and the step index.
int observation_dim(const ProtocolConfig& config, const TaskSpec& task);

/// Concatenates IR readings with the mode's features. `estimates` holds one
/// vector per POI and is only read in ShortestPath2D mode. Histogram counts are
/// normalized by (M-1). Throws std::invalid_argument for ShortestPath2D
/// outside the link task.
Eigen::VectorXd assemble_observation(const WorldState& world, int agent_id,
                                     const std::vector<ShortestPathEstimates>& estimates,
                                     const ProtocolConfig& config, const TaskSpec& task);

}  // namespace swarm
