#pragma once

#include <string>
#include <vector>

#include "framekit/pipeline.hpp"
#include "framekit/synthworld.hpp"

namespace framekit {

struct MissionSpec {
  std::string name;
  std::vector<Point3> waypoints;
  RigidTransformd world_from_map;
};

/// A tunnel network plus the missions flown through it, in merge order.
struct Scenario {
  std::string name;
  std::vector<TunnelSegment> segments;
  double noise_sigma = 0.02;
  std::uint64_t seed = 7;
  std::vector<MissionSpec> missions;
};

struct ScenarioRun {
  SyntheticWorld world;
  std::vector<KeyframeLog> logs;
  std::vector<RigidTransformd> world_from_map;

  /// True 1T_n for log n.
  [[nodiscard]] RigidTransformd ground_truth(std::size_t n) const {
    return world_from_map.front().inverse() * world_from_map[n];
  }
};

/// Builds the world and simulates every mission.
ScenarioRun run_scenario(const Scenario& scenario);

/// Straight tunnel traversed in opposite directions; agent 2's frame is yawed by 180 deg and
/// shifted by (30, 10, 0).
Scenario straight_opposite_scenario();
/// Two agents leaving a T-junction through different branches after sharing the stem.
Scenario t_junction_scenario();
/// One long main run and three branch runs, each branch entering from the main tunnel.
Scenario four_map_scenario();
/// Cross junction of 10 m wide tunnels; agent 2 comes from the north and turns into the east arm.
Scenario wide_junction_scenario();
/// Bent 2 m wide gallery.
Scenario narrow_scenario();

std::vector<Scenario> acceptance_scenarios();

}  // namespace framekit
