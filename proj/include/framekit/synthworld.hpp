#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "framekit/keyframe.hpp"
#include "framekit/rangeproj.hpp"

namespace framekit {

/// Straight tunnel with a rectangular cross-section. The segment line runs through the
/// center of the cross-section; `height` is measured along world z.
struct TunnelSegment {
  Point3 start = Point3::Zero();
  Point3 end = Point3::Zero();
  double width = 0.0;
  double height = 0.0;
};

/// Oriented box of free space. Columns of `axes` are (along, lateral, up).
struct TunnelBox {
  Point3 center = Point3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  Point3 half_extent = Point3::Zero();

  [[nodiscard]] bool contains(const Point3& p, double margin = 0.0) const;
  /// Distance from p to the nearest face of the box (interior or exterior).
  [[nodiscard]] double distance_to_surface(const Point3& p) const;
};

struct Junction {
  Point3 center = Point3::Zero();
  std::vector<std::size_t> segments;
};

/// A network of tunnel segments. The free space is the union of the segment boxes; every
/// box face not covered by another box is a wall, floor, ceiling or end cap.
struct SyntheticWorld {
  std::vector<TunnelSegment> segments;
  std::vector<TunnelBox> boxes;
  std::vector<Junction> junctions;
  double surface_noise_sigma = 0.02;
  std::uint64_t seed = 0;

  [[nodiscard]] bool inside(const Point3& p) const;
  /// Distance along a unit ray from an inside origin to the first tunnel surface, or
  /// std::nullopt when no surface is hit within max_range.
  [[nodiscard]] std::optional<double> cast(const Point3& origin, const Point3& direction, double max_range) const;
  /// Distance to the closest face of any box.
  [[nodiscard]] double distance_to_surface(const Point3& p) const;
};

/// Validates segments and derives boxes and junctions. Segment ends shared with another
/// segment are extended by half the tunnel width so corners close. Throws
/// std::invalid_argument on degenerate or disconnected input.
SyntheticWorld build_world(const std::vector<TunnelSegment>& segments, double noise_sigma = 0.02,
                           std::uint64_t seed = 0);

/// Ray-cast scan in the SENSOR frame (sensor yawed by pose.yaw) with Gaussian range noise.
/// One ray per pixel center of `model`. `salt` decorrelates the noise of different scans.
/// Throws std::invalid_argument when the pose is outside the tunnels.
PointCloud simulate_scan(const SyntheticWorld& world, const Pose3& pose, const ProjectionModel& model,
                         std::uint64_t salt = 0);

/// Dense 32 x 360 sensor used for mission maps; same +-22.5 deg field of view and 50 m range
/// as the 64 x 16 descriptor image, so each image pixel pools a few rays.
ProjectionModel mapping_sensor_model();

struct MissionOptions {
  /// Sensor used for ray casting and the accumulated map.
  ProjectionModel sensor = mapping_sensor_model();
  double step = 0.5;
  double rot_threshold = kDefaultRotationThreshold;
  /// Pose of the agent's map frame in the world; map-frame data = world_from_map^-1 * world data.
  RigidTransformd world_from_map;
  std::uint64_t salt = 0;
};

/// Poses every `step` meters along the waypoint polyline, heading along each leg.
Trajectory walk_waypoints(const std::vector<Point3>& waypoints, double step);

/// Runs the exploration loop along the waypoints: spaciousness, threshold, sampling test,
/// projection of the heading-aligned scan with `projection`, extraction and append.
/// Poses, the map and orientation vectors are expressed in the agent's map frame.
KeyframeLog simulate_mission(const SyntheticWorld& world, const std::vector<Point3>& waypoints,
                             const ProjectionModel& projection, const MissionOptions& options = {});

/// Adds dead-end niches along the walls of every segment, roughly every `mean_spacing`
/// meters, alternating sides at random. Niches stay clear of segment ends and other tunnels.
std::vector<TunnelSegment> add_alcoves(const std::vector<TunnelSegment>& segments, double mean_spacing,
                                       std::uint64_t seed);

/// Parses the world spec text format: `x1 y1 z1 x2 y2 z2 width height` per line, `#` comments.
/// Throws ParseError naming the offending line.
std::vector<TunnelSegment> parse_world_spec(const std::string& text);
std::string format_world_spec(const std::vector<TunnelSegment>& segments);

}  // namespace framekit
