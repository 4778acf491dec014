#include "framekit/scenarios.hpp"

#include <numbers>
#include <random>

namespace framekit {

namespace {

RigidTransformd frame(double yaw_deg, const Point3& t) {
  return RigidTransformd(yaw_matrix(yaw_deg * std::numbers::pi / 180.0), t);
}

// Collinear sections with cross-sections drawn around the nominal size, like drifts driven
// in several campaigns. Section lengths 10-22 m, width and height within +-25%.
std::vector<TunnelSegment> sectioned(const Point3& a, const Point3& b, double width, double height,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> length(10.0, 22.0);
  std::uniform_real_distribution<double> scale(0.75, 1.25);
  const double total = (b - a).norm();
  const Point3 dir = (b - a) / total;
  std::vector<TunnelSegment> out;
  double at = 0.0;
  while (at < total - 1e-9) {
    double next = std::min(total, at + length(rng));
    if (total - next < 6.0) next = total;
    out.push_back({a + at * dir, a + next * dir, width * scale(rng), height * scale(rng)});
    at = next;
  }
  return out;
}

std::vector<TunnelSegment> concat(std::initializer_list<std::vector<TunnelSegment>> parts) {
  std::vector<TunnelSegment> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

ScenarioRun run_scenario(const Scenario& scenario) {
  ScenarioRun run;
  run.world = build_world(scenario.segments, scenario.noise_sigma, scenario.seed);
  run.logs.resize(scenario.missions.size());
  for (const auto& m : scenario.missions) run.world_from_map.push_back(m.world_from_map);

  auto simulate = [&](std::size_t i) {
    MissionOptions options;
    options.world_from_map = scenario.missions[i].world_from_map;
    options.salt = 1000 + i;
    run.logs[i] = simulate_mission(run.world, scenario.missions[i].waypoints, ProjectionModel{}, options);
  };
  for (std::size_t i = 0; i < scenario.missions.size(); ++i) simulate(i);
  return run;
}

Scenario straight_opposite_scenario() {
  Scenario s;
  s.name = "straight_opposite";
  s.segments = add_alcoves(sectioned(Point3(0, 0, 0), Point3(120, 0, 0), 6, 5, 21), 10.0, 11);
  s.missions = {
      {"agent1", {Point3(2, 0, 0), Point3(85, 0, 0)}, RigidTransformd::Identity()},
      {"agent2", {Point3(118, 0, 0), Point3(35, 0, 0)}, frame(180, Point3(30, 10, 0))},
  };
  return s;
}

Scenario t_junction_scenario() {
  Scenario s;
  s.name = "t_junction";
  s.segments = add_alcoves(concat({sectioned(Point3(0, 0, 0), Point3(60, 0, 0), 6, 5, 31), sectioned(Point3(60, 0, 0), Point3(60, 60, 0), 6, 5, 32),
                                   sectioned(Point3(60, 0, 0), Point3(60, -60, 0), 6, 5, 33)}),
                           10.0, 12);
  s.missions = {
      {"agent1", {Point3(3, 0, 0), Point3(60, 0, 0), Point3(60, 55, 0)}, RigidTransformd::Identity()},
      {"agent2", {Point3(20, 0, 0), Point3(60, 0, 0), Point3(60, -55, 0)}, frame(-115, Point3(-20, 15, 1))},
  };
  return s;
}

Scenario four_map_scenario() {
  Scenario s;
  s.name = "four_map";
  s.segments = add_alcoves(concat({sectioned(Point3(0, 0, 0), Point3(200, 0, 0), 6, 5, 41), sectioned(Point3(50, 0, 0), Point3(50, 60, 0), 6, 5, 42),
                                   sectioned(Point3(110, 0, 0), Point3(110, -60, 0), 6, 5, 43), sectioned(Point3(160, 0, 0), Point3(160, 60, 0), 6, 5, 44)}),
                           10.0, 13);
  s.missions = {
      {"main", {Point3(3, 0, 0), Point3(197, 0, 0)}, RigidTransformd::Identity()},
      {"branch1", {Point3(50, 57, 0), Point3(50, 0, 0), Point3(10, 0, 0)}, frame(75, Point3(12, -40, 0))},
      {"branch2", {Point3(110, -57, 0), Point3(110, 0, 0), Point3(150, 0, 0)}, frame(-150, Point3(-35, 5, 0))},
      {"branch3", {Point3(160, 57, 0), Point3(160, 0, 0), Point3(195, 0, 0)}, frame(150, Point3(60, 60, -1))},
  };
  return s;
}

Scenario wide_junction_scenario() {
  Scenario s;
  s.name = "wide_junction";
  s.segments = add_alcoves(concat({sectioned(Point3(-60, 0, 0), Point3(0, 0, 0), 10, 7, 51), sectioned(Point3(0, 0, 0), Point3(60, 0, 0), 10, 7, 52),
                                   sectioned(Point3(0, -60, 0), Point3(0, 0, 0), 10, 7, 53), sectioned(Point3(0, 0, 0), Point3(0, 60, 0), 10, 7, 54)}),
                           12.0, 14);
  s.missions = {
      {"agent1", {Point3(-55, 0, 0), Point3(55, 0, 0)}, RigidTransformd::Identity()},
      {"agent2", {Point3(0, 55, 0), Point3(0, 0, 0), Point3(55, 0, 0)}, frame(100, Point3(25, -30, 0))},
  };
  return s;
}

Scenario narrow_scenario() {
  Scenario s;
  s.name = "narrow";
  s.segments = add_alcoves(concat({sectioned(Point3(0, 0, 0), Point3(40, 0, 0), 2, 2.5, 61), sectioned(Point3(40, 0, 0), Point3(40, 40, 0), 2, 2.5, 62)}), 6.0, 15);
  s.missions = {
      {"agent1", {Point3(1, 0, 0), Point3(40, 0, 0), Point3(40, 20, 0)}, RigidTransformd::Identity()},
      {"agent2", {Point3(40, 39, 0), Point3(40, 0, 0), Point3(25, 0, 0)}, frame(-60, Point3(8, 8, 0))},
  };
  return s;
}

std::vector<Scenario> acceptance_scenarios() {
  return {straight_opposite_scenario(), t_junction_scenario(), four_map_scenario(), wide_junction_scenario(),
          narrow_scenario()};
}

}  // namespace framekit
