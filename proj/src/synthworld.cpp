#include "framekit/synthworld.hpp"

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <limits>
#include <queue>
#include <random>
#include <sstream>

#include "framekit/descriptor.hpp"
#include "framekit/errors.hpp"
#include "framekit/parallel.hpp"

namespace framekit {

namespace {

constexpr double kEndpointTolerance = 1e-3;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct RayInterval {
  double enter;
  double exit;
};

std::optional<RayInterval> intersect(const TunnelBox& box, const Point3& origin, const Point3& dir) {
  const Point3 lo = box.axes.transpose() * (origin - box.center);
  const Point3 ld = box.axes.transpose() * dir;
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double h = box.half_extent(a);
    if (std::abs(ld(a)) < 1e-15) {
      if (std::abs(lo(a)) > h) return std::nullopt;
      continue;
    }
    double t1 = (-h - lo(a)) / ld(a);
    double t2 = (h - lo(a)) / ld(a);
    if (t1 > t2) std::swap(t1, t2);
    t_enter = std::max(t_enter, t1);
    t_exit = std::min(t_exit, t2);
  }
  if (t_exit < std::max(t_enter, 0.0)) return std::nullopt;
  return RayInterval{t_enter, t_exit};
}

std::optional<double> cast_through(const std::vector<const TunnelBox*>& boxes, const Point3& origin,
                                   const Point3& dir, double max_range) {
  std::vector<RayInterval> hits;
  hits.reserve(boxes.size());
  for (const TunnelBox* box : boxes) {
    if (auto iv = intersect(*box, origin, dir)) hits.push_back(*iv);
  }
  std::sort(hits.begin(), hits.end(), [](const RayInterval& a, const RayInterval& b) { return a.enter < b.enter; });

  constexpr double kGap = 1e-9;
  double reach = -1.0;
  for (const auto& iv : hits) {
    if (iv.enter <= kGap) {
      reach = std::max(reach, iv.exit);
    } else if (reach >= 0.0 && iv.enter <= reach + kGap) {
      reach = std::max(reach, iv.exit);
    } else {
      break;
    }
  }
  if (reach < 0.0 || reach > max_range) return std::nullopt;
  return reach;
}

Eigen::Matrix3d segment_axes(const TunnelSegment& s) {
  const Point3 along = (s.end - s.start).normalized();
  const Point3 lateral = Point3::UnitZ().cross(along).normalized();
  const Point3 up = along.cross(lateral);
  Eigen::Matrix3d axes;
  axes.col(0) = along;
  axes.col(1) = lateral;
  axes.col(2) = up;
  return axes;
}

void validate_segment(const TunnelSegment& s, std::size_t index) {
  const std::string where = "segment " + std::to_string(index) + ": ";
  if (!s.start.allFinite() || !s.end.allFinite() || !std::isfinite(s.width) || !std::isfinite(s.height)) {
    throw std::invalid_argument(where + "non-finite value");
  }
  if ((s.end - s.start).norm() <= 0.0) throw std::invalid_argument(where + "zero length");
  if (!(s.width > 0.0) || !(s.height > 0.0)) throw std::invalid_argument(where + "width and height must be > 0");
  if ((s.end - s.start).head<2>().norm() < 1e-6) throw std::invalid_argument(where + "vertical segments unsupported");
}

}  // namespace

bool TunnelBox::contains(const Point3& p, double margin) const {
  const Point3 local = axes.transpose() * (p - center);
  return (local.cwiseAbs().array() <= (half_extent.array() + margin)).all();
}

double TunnelBox::distance_to_surface(const Point3& p) const {
  const Point3 local = (axes.transpose() * (p - center)).cwiseAbs();
  const Point3 excess = local - half_extent;
  if ((excess.array() <= 0.0).all()) return -excess.maxCoeff();
  return excess.cwiseMax(0.0).norm();
}

bool SyntheticWorld::inside(const Point3& p) const {
  return std::any_of(boxes.begin(), boxes.end(), [&](const TunnelBox& b) { return b.contains(p); });
}

std::optional<double> SyntheticWorld::cast(const Point3& origin, const Point3& direction, double max_range) const {
  std::vector<const TunnelBox*> all;
  all.reserve(boxes.size());
  for (const auto& b : boxes) all.push_back(&b);
  return cast_through(all, origin, direction.normalized(), max_range);
}

double SyntheticWorld::distance_to_surface(const Point3& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : boxes) best = std::min(best, b.distance_to_surface(p));
  return best;
}

SyntheticWorld build_world(const std::vector<TunnelSegment>& segments, double noise_sigma, std::uint64_t seed) {
  if (segments.empty()) throw std::invalid_argument("build_world: at least one segment required");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("build_world: noise must be >= 0");
  for (std::size_t i = 0; i < segments.size(); ++i) validate_segment(segments[i], i);

  const std::size_t n = segments.size();
  auto endpoint = [&](std::size_t i, int which) -> const Point3& {
    return which == 0 ? segments[i].start : segments[i].end;
  };
  auto shared = [&](std::size_t i, int which) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if ((endpoint(j, 0) - endpoint(i, which)).norm() < kEndpointTolerance ||
          (endpoint(j, 1) - endpoint(i, which)).norm() < kEndpointTolerance) {
        return true;
      }
    }
    return false;
  };

  SyntheticWorld world;
  world.segments = segments;
  world.surface_noise_sigma = noise_sigma;
  world.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = segments[i];
    const Eigen::Matrix3d axes = segment_axes(s);
    const double ext_start = shared(i, 0) ? 0.5 * s.width : 0.0;
    const double ext_end = shared(i, 1) ? 0.5 * s.width : 0.0;
    const Point3 a = s.start - ext_start * axes.col(0);
    const Point3 b = s.end + ext_end * axes.col(0);
    world.boxes.push_back(TunnelBox{0.5 * (a + b), axes, Point3(0.5 * (b - a).norm(), 0.5 * s.width, 0.5 * s.height)});
  }

  // Adjacency: an endpoint of one segment lies in the other's free space.
  std::vector<std::vector<std::size_t>> adjacent(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (int w = 0; w < 2; ++w) {
        if (world.boxes[j].contains(endpoint(i, w), 1e-6)) {
          adjacent[i].push_back(j);
          adjacent[j].push_back(i);
          const Point3& c = endpoint(i, w);
          auto it = std::find_if(world.junctions.begin(), world.junctions.end(),
                                 [&](const Junction& jn) { return (jn.center - c).norm() < kEndpointTolerance; });
          if (it == world.junctions.end()) {
            world.junctions.push_back(Junction{c, {}});
            it = world.junctions.end() - 1;
          }
          for (std::size_t id : {i, j}) {
            if (std::find(it->segments.begin(), it->segments.end(), id) == it->segments.end()) it->segments.push_back(id);
          }
        }
      }
    }
  }

  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop();
    for (std::size_t j : adjacent[i]) {
      if (!seen[j]) {
        seen[j] = true;
        frontier.push(j);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) throw std::invalid_argument("build_world: segment " + std::to_string(i) + " is disconnected");
  }
  return world;
}

ProjectionModel mapping_sensor_model() {
  ProjectionModel m;
  m.width = 360;
  m.height = 32;
  return m;
}

PointCloud simulate_scan(const SyntheticWorld& world, const Pose3& pose, const ProjectionModel& model,
                         std::uint64_t salt) {
  model.validate();
  if (!pose.position.allFinite() || !world.inside(pose.position)) {
    throw std::invalid_argument("simulate_scan: pose outside the tunnel volume");
  }

  std::vector<const TunnelBox*> candidates;
  for (const auto& b : world.boxes) {
    if ((b.center - pose.position).norm() - b.half_extent.norm() <= model.max_range) candidates.push_back(&b);
  }

  const Eigen::Matrix3d heading = yaw_matrix(pose.yaw.value_or(0.0));
  const auto rays = static_cast<std::size_t>(model.width) * static_cast<std::size_t>(model.height);
  std::vector<Point3> directions(rays);
  std::vector<double> ranges(rays, -1.0);
  parallel_for(rays, [&](std::size_t i) {
    const int v = static_cast<int>(i / static_cast<std::size_t>(model.width));
    const int u = static_cast<int>(i % static_cast<std::size_t>(model.width));
    const double az = model.column_azimuth(u);
    const double el = model.row_elevation(v);
    directions[i] = Point3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    if (auto hit = cast_through(candidates, pose.position, heading * directions[i], model.max_range)) ranges[i] = *hit;
  });

  PointCloud scan;
  scan.frame = "sensor";
  scan.points.reserve(rays);
  std::mt19937_64 rng(mix_seed(world.seed, salt));
  std::normal_distribution<double> noise(0.0, world.surface_noise_sigma > 0.0 ? world.surface_noise_sigma : 1.0);
  for (std::size_t i = 0; i < rays; ++i) {
    if (ranges[i] < 0.0) continue;
    double r = ranges[i];
    if (world.surface_noise_sigma > 0.0) {
      // Truncated at 3 sigma so every return stays within a known band of its surface.
      double n = noise(rng);
      while (std::abs(n) > 3.0 * world.surface_noise_sigma) n = noise(rng);
      r = std::max(1e-3, r + n);
    }
    scan.points.push_back(directions[i] * r);
  }
  return scan;
}

Trajectory walk_waypoints(const std::vector<Point3>& waypoints, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("walk_waypoints: step must be > 0");
  Trajectory out;
  if (waypoints.empty()) return out;
  if (waypoints.size() == 1) {
    out.push_back(Pose3{waypoints.front(), 0.0});
    return out;
  }

  double carried = 0.0;  // arc length already covered into the current leg
  for (std::size_t leg = 0; leg + 1 < waypoints.size(); ++leg) {
    const Point3 a = waypoints[leg];
    const Point3 delta = waypoints[leg + 1] - a;
    const double length = delta.norm();
    if (length <= 0.0) continue;
    const Point3 dir = delta / length;
    const double yaw = std::atan2(dir.y(), dir.x());
    int i = 0;
    for (double s = carried; s < length - 1e-9; s = carried + (++i) * step) out.push_back(Pose3{a + s * dir, yaw});
    carried = carried + i * step - length;
  }
  const Point3 last_dir = (waypoints.back() - waypoints[waypoints.size() - 2]).normalized();
  out.push_back(Pose3{waypoints.back(), std::atan2(last_dir.y(), last_dir.x())});
  return out;
}

KeyframeLog simulate_mission(const SyntheticWorld& world, const std::vector<Point3>& waypoints,
                             const ProjectionModel& projection, const MissionOptions& options) {
  projection.validate();
  for (const auto& w : waypoints) {
    if (!world.inside(w)) throw std::invalid_argument("simulate_mission: waypoint outside the tunnels");
  }
  const RigidTransformd map_from_world = options.world_from_map.inverse();
  const double frame_yaw = options.world_from_map.yaw();

  KeyframeLog log;
  log.map.frame = "map";
  SpaciousnessState state;
  const Trajectory path = walk_waypoints(waypoints, options.step);
  for (std::size_t k = 0; k < path.size(); ++k) {
    const Pose3& world_pose = path[k];
    const PointCloud scan = simulate_scan(world, world_pose, options.sensor, mix_seed(options.salt, k));
    if (scan.empty()) {
      std::cerr << "simulate_mission: empty scan at step " << k << ", skipped\n";
      continue;
    }
    const auto [s_k, next_state] = update_spaciousness(state, scan);
    state = next_state;
    const double th_k = sampling_threshold(s_k);

    const Pose3 pose{map_from_world * world_pose.position, normalize_angle(world_pose.yaw.value_or(0.0) - frame_yaw)};
    if (!should_sample(log, pose, th_k, options.rot_threshold)) continue;

    // Heading-aligned, sensor-centered scan: the registered scan minus the translation.
    const Eigen::Matrix3d to_map = yaw_matrix(*pose.yaw);
    PointCloud aligned;
    aligned.frame = "aligned";
    aligned.points.reserve(scan.size());
    for (const auto& p : scan.points) aligned.points.push_back(to_map * p);
    const RangeImage img = project(aligned, projection);
    if (!img.has_returns()) continue;
    const DescriptorPair desc = extract(img);

    PointCloud registered = apply(RigidTransformd::Translation(pose.position), aligned, "map");
    log = append_keyframe(std::move(log), pose, desc.place, desc.orientation, registered, th_k);
  }
  return log;
}

std::vector<TunnelSegment> add_alcoves(const std::vector<TunnelSegment>& segments, double mean_spacing,
                                       std::uint64_t seed) {
  if (!(mean_spacing > 0.0)) throw std::invalid_argument("add_alcoves: spacing must be > 0");
  std::vector<TunnelSegment> out = segments;
  std::mt19937_64 rng(mix_seed(seed, 0xa1c0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<TunnelBox> others;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    validate_segment(segments[i], i);
    const auto& s = segments[i];
    const Eigen::Matrix3d axes = segment_axes(s);
    others.push_back(TunnelBox{0.5 * (s.start + s.end), axes,
                               Point3(0.5 * (s.end - s.start).norm() + 0.5 * s.width, 0.5 * s.width, 0.5 * s.height)});
  }

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    const Eigen::Matrix3d axes = segment_axes(s);
    const double length = (s.end - s.start).norm();
    const double clearance = std::max(s.width, 4.0);
    for (double at = clearance + mean_spacing * unit(rng); at < length - clearance;
         at += mean_spacing * (0.6 + 0.8 * unit(rng))) {
      const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
      const double depth = std::clamp((0.3 + 0.3 * unit(rng)) * s.width, 0.8, 3.0);
      const double width = std::clamp((0.4 + 0.4 * unit(rng)) * s.width, 1.0, 4.0);
      const Point3 base = s.start + at * axes.col(0);
      TunnelSegment alcove{base + side * (0.5 * s.width - 0.25) * axes.col(1),
                           base + side * (0.5 * s.width + depth) * axes.col(1), width, 0.7 * s.height};

      // Keep niches from breaking into neighbouring tunnels.
      bool clear = true;
      for (std::size_t j = 0; j < others.size() && clear; ++j) {
        if (j == i) continue;
        for (double f : {0.0, 0.5, 1.0}) {
          for (double lat : {-0.5, 0.0, 0.5}) {
            const Point3 probe = alcove.start + f * (alcove.end - alcove.start) + lat * width * axes.col(0);
            if (others[j].contains(probe, 1.0)) clear = false;
          }
        }
      }
      if (clear) out.push_back(alcove);
    }
  }
  return out;
}

std::vector<TunnelSegment> parse_world_spec(const std::string& text) {
  std::vector<TunnelSegment> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    double v[8];
    for (double& x : v) {
      if (!(fields >> x) || !std::isfinite(x)) {
        throw ParseError("world spec", ParseError::Unit::Line, number, "expected 8 numbers: x1 y1 z1 x2 y2 z2 width height");
      }
    }
    std::string extra;
    if (fields >> extra) throw ParseError("world spec", ParseError::Unit::Line, number, "trailing field '" + extra + "'");
    TunnelSegment seg{Point3(v[0], v[1], v[2]), Point3(v[3], v[4], v[5]), v[6], v[7]};
    try {
      validate_segment(seg, out.size());
    } catch (const std::invalid_argument& e) {
      throw ParseError("world spec", ParseError::Unit::Line, number, e.what());
    }
    out.push_back(seg);
  }
  return out;
}

std::string format_world_spec(const std::vector<TunnelSegment>& segments) {
  std::ostringstream out;
  out << "# x1 y1 z1 x2 y2 z2 width height\n" << std::setprecision(17);
  for (const auto& s : segments) {
    out << s.start.x() << ' ' << s.start.y() << ' ' << s.start.z() << ' ' << s.end.x() << ' ' << s.end.y() << ' '
        << s.end.z() << ' ' << s.width << ' ' << s.height << '\n';
  }
  return out.str();
}

}  // namespace framekit
