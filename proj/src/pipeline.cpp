#include "framekit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "framekit/parallel.hpp"

namespace framekit {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Keyframe ranges [begin, end) that came from one agent; spacing is never measured across them.
using Segments = std::vector<std::size_t>;

double segment_radius(const Trajectory& traj, const Segments& starts, std::size_t k) {
  const auto it = std::upper_bound(starts.begin(), starts.end(), k);
  const std::size_t begin = *(it - 1);
  const std::size_t end = it == starts.end() ? traj.size() : *it;
  if (end - begin < 2) throw std::invalid_argument("adaptive_radius: keyframe segment has a single pose");
  const Trajectory local(traj.begin() + static_cast<std::ptrdiff_t>(begin), traj.begin() + static_cast<std::ptrdiff_t>(end));
  return adaptive_radius(local, k - begin);
}

void check_log(const KeyframeLog& log, const char* name) {
  if (log.empty()) throw std::invalid_argument(std::string("merge: ") + name + " is empty");
  if (!log.consistent()) throw std::invalid_argument(std::string("merge: ") + name + " stacks have unequal lengths");
}

MergeReport merge_impl(const KeyframeLog& log1, const Segments& segments1, const KeyframeLog& log2,
                       const MergeOptions& options, const std::optional<RigidTransformd>& gt) {
  check_log(log1, "log1");
  check_log(log2, "log2");
  options.gicp.validate();

  const auto start = Clock::now();
  MergeReport report;

  auto stage = Clock::now();
  const DescriptorIndex index = build_index(log1.place_stack);
  report.match = find_overlap(index, log2.place_stack);
  const Pose3& p1 = log1.trajectory[report.match.k_i];
  const Pose3& p2 = log2.trajectory[report.match.k_j];
  try {
    report.initial = initial_transform(p1, p2, log1.orient_stack[report.match.k_i], log2.orient_stack[report.match.k_j]);
  } catch (const DegenerateInput& e) {
    throw MergeFailure(std::string("merge: degenerate orientation descriptors: ") + e.what(), report);
  }
  report.transform = report.initial;
  report.timings.query_ms = elapsed_ms(stage);

  stage = Clock::now();
  try {
    report.radius1 = segment_radius(log1.trajectory, segments1, report.match.k_i);
    report.radius2 = adaptive_radius(log2.trajectory, report.match.k_j);
  } catch (const std::invalid_argument& e) {
    throw MergeFailure(e.what(), report);
  }
  const PointCloud s1 = sample_sphere(log1.map, p1.position, report.radius1);
  const PointCloud s2 = sample_sphere(log2.map, p2.position, report.radius2);
  report.sample1_size = s1.size();
  report.sample2_size = s2.size();
  report.timings.sample_ms = elapsed_ms(stage);
  if (s1.empty() || s2.empty()) {
    throw MergeFailure("merge: empty sphere sample (k_i=" + std::to_string(report.match.k_i) +
                           ", k_j=" + std::to_string(report.match.k_j) + ", r1=" + std::to_string(report.radius1) +
                           ", r2=" + std::to_string(report.radius2) + ")",
                       report);
  }

  stage = Clock::now();
  GicpConfig cfg = options.gicp;
  if (options.tight_correspondence && (p1.position - p2.position).norm() <= options.tight_pose_distance) {
    cfg.max_correspondence_distance = std::min(cfg.max_correspondence_distance, options.tight_max_correspondence);
  }
  try {
    report.registration = gicp_align(s2, s1, report.initial, cfg);
  } catch (const std::invalid_argument& e) {
    report.timings.gicp_ms = elapsed_ms(stage);
    throw MergeFailure(std::string("merge: sphere samples too small for registration: ") + e.what(), report);
  }
  report.timings.gicp_ms = elapsed_ms(stage);
  report.transform = report.registration.transform;
  if (gt) report.errors = evaluate(report.transform, *gt);

  if (!report.registration.converged) throw MergeFailure("merge: registration did not converge", report);
  if (report.registration.inlier_fraction < options.min_inlier_fraction) {
    throw MergeFailure("merge: only " + std::to_string(report.registration.inlier_fraction) +
                           " of the sampled points found a correspondence; the spheres do not overlap",
                       report);
  }
  report.converged = true;

  stage = Clock::now();
  report.merged_map.frame = log1.map.frame;
  report.merged_map.points.reserve(log1.map.size() + log2.map.size());
  report.merged_map.points = log1.map.points;
  const Eigen::Matrix3d& r = report.transform.rotation();
  const Point3& t = report.transform.translation();
  for (const auto& m : log2.map.points) report.merged_map.points.push_back(r * m + t);
  if (options.downsample_union) report.merged_map = voxel_downsample(report.merged_map, options.union_leaf);
  report.timings.union_ms = elapsed_ms(stage);
  report.timings.total_ms = elapsed_ms(start);
  return report;
}

}  // namespace

TransformError evaluate(const RigidTransformd& transform, const RigidTransformd& gt) {
  TransformError e;
  e.translation = (gt.translation() - transform.translation()).norm();
  const Eigen::Matrix3d delta = gt.rotation() * transform.rotation().transpose();
  e.rotation_frob = (delta - Eigen::Matrix3d::Identity()).norm();
  // atan2 of (sin, cos) stays accurate near 0 and pi, where acos of the trace loses half the digits.
  const Eigen::Vector3d axis(delta(2, 1) - delta(1, 2), delta(0, 2) - delta(2, 0), delta(1, 0) - delta(0, 1));
  e.rotation_deg = std::atan2(0.5 * axis.norm(), 0.5 * (delta.trace() - 1.0)) * 180.0 / std::numbers::pi;
  return e;
}

RigidTransformd initial_transform(const Pose3& p1, const Pose3& p2, const OrientationDescriptor& w1,
                                  const OrientationDescriptor& w2) {
  const double yaw = yaw_discrepancy(w1, w2);
  const Eigen::Matrix3d r = yaw_matrix(yaw);
  // Rotating the offset as well keeps p2 on p1; without it the start is off by |(I - R) p2|.
  return RigidTransformd(r, p1.position - r * p2.position);
}

double radius_for_spacing(double l) {
  if (!(l >= 0.0)) throw std::invalid_argument("radius_for_spacing: spacing must be >= 0");
  if (l >= 10.0) return 25.0;
  if (l >= 6.0) return 15.0;
  if (l >= 3.0) return 10.0;
  return 2.0 * l;
}

double adaptive_radius(const Trajectory& traj, std::size_t k) {
  if (traj.size() < 2) throw std::invalid_argument("adaptive_radius: trajectory needs at least two poses");
  if (k >= traj.size()) throw std::out_of_range("adaptive_radius: keyframe index out of range");
  const std::size_t other = k == 0 ? 1 : k - 1;
  return radius_for_spacing((traj[k].position - traj[other].position).norm());
}

PointCloud sample_sphere(const PointCloud& map, const Point3& center, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("sample_sphere: radius must be > 0");
  PointCloud out;
  out.frame = map.frame;
  const double r2 = r * r;
  for (const auto& m : map.points) {
    if ((m - center).squaredNorm() <= r2) out.points.push_back(m);
  }
  return out;
}

MergeReport merge_pair(const KeyframeLog& log1, const KeyframeLog& log2, const MergeOptions& options,
                       const std::optional<RigidTransformd>& gt) {
  return merge_impl(log1, Segments{0}, log2, options, gt);
}

KeyframeLog transform_log(const KeyframeLog& log, const RigidTransformd& t) {
  KeyframeLog out;
  const double yaw = t.yaw();
  out.map = apply(t, log.map);
  out.place_stack = log.place_stack;
  out.thresholds = log.thresholds;
  out.trajectory.reserve(log.size());
  for (const auto& p : log.trajectory) {
    Pose3 moved{t * p.position, std::nullopt};
    if (p.yaw) moved.yaw = normalize_angle(*p.yaw + yaw);
    out.trajectory.push_back(moved);
  }
  out.orient_stack.reserve(log.orient_stack.size());
  for (const auto& w : log.orient_stack) out.orient_stack.push_back(rotate_orientation(w, yaw));
  return out;
}

SequenceReport merge_sequence(const std::vector<KeyframeLog>& logs, const MergeOptions& options,
                              const std::optional<std::vector<RigidTransformd>>& world_from_map,
                              const StepCallback& on_step) {
  if (logs.size() < 2) throw std::invalid_argument("merge_sequence: at least two logs required");
  if (world_from_map && world_from_map->size() != logs.size()) {
    throw std::invalid_argument("merge_sequence: one ground-truth frame per log required");
  }

  SequenceReport out;
  KeyframeLog running = logs.front();
  Segments segments{0};
  for (std::size_t n = 1; n < logs.size(); ++n) {
    std::optional<RigidTransformd> gt;
    if (world_from_map) gt = (*world_from_map)[0].inverse() * (*world_from_map)[n];

    MergeReport step;
    try {
      step = merge_impl(running, segments, logs[n], options, gt);
    } catch (const MergeFailure& f) {
      throw MergeFailure("step " + std::to_string(n) + ": " + f.what(), f.partial(), n);
    }

    const KeyframeLog moved = transform_log(logs[n], step.transform);
    segments.push_back(running.size());
    running.map = std::move(step.merged_map);
    step.merged_map = PointCloud{{}, running.map.frame};
    running.trajectory.insert(running.trajectory.end(), moved.trajectory.begin(), moved.trajectory.end());
    running.place_stack.insert(running.place_stack.end(), moved.place_stack.begin(), moved.place_stack.end());
    running.orient_stack.insert(running.orient_stack.end(), moved.orient_stack.begin(), moved.orient_stack.end());
    running.thresholds.insert(running.thresholds.end(), moved.thresholds.begin(), moved.thresholds.end());

    out.transforms.push_back(step.transform);
    if (on_step) on_step(n, step);
    out.steps.push_back(std::move(step));
  }
  out.global_map = std::move(running.map);
  return out;
}

namespace {

struct Survey {
  PointCloud map;
  std::vector<Point3> anchors;
};

Survey survey_world(const SyntheticWorld& world, const EnvelopeOptions& options, std::uint64_t salt) {
  Survey s;
  s.map.frame = "world";
  for (std::size_t i = 0; i < world.segments.size(); ++i) {
    const auto& seg = world.segments[i];
    const Point3 axis = seg.end - seg.start;
    const double length = axis.norm();
    if (length < options.min_segment_length) continue;
    const Point3 dir = axis / length;
    const double inset = std::min(1.0, 0.25 * length);
    MissionOptions mission;
    mission.salt = salt * 7919 + i;
    std::vector<Point3> path = {seg.start + inset * dir, seg.end - inset * dir};
    // Later surveys walk each segment backwards, so their keyframes (and the ray patterns they
    // leave on the walls) do not coincide with the first survey's.
    if (salt % 2 == 0) std::swap(path[0], path[1]);
    const KeyframeLog log = simulate_mission(world, path, ProjectionModel{}, mission);
    s.map.points.insert(s.map.points.end(), log.map.points.begin(), log.map.points.end());
    for (const auto& p : log.trajectory) s.anchors.push_back(p.position);
  }
  if (s.anchors.empty()) throw std::invalid_argument("failure_envelope: no segment long enough to survey");
  return s;
}

struct PreparedMap {
  CovariantCloud cloud;
};

PreparedMap prepare(const PointCloud& map, const GicpConfig& cfg) {
  const PointCloud reduced = cfg.voxel_leaf > 0.0 ? voxel_downsample(map, cfg.voxel_leaf) : map;
  return {estimate_covariances(reduced, cfg.k_neighbors, cfg.plane_regularization)};
}

// Sphere of a prepared map, re-centered on `center` and rotated by `r`.
CovariantCloud sphere_local(const CovariantCloud& map, const Point3& center, double radius, const Eigen::Matrix3d& r) {
  CovariantCloud out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const Point3 d = map.points.points[i] - center;
    if (d.squaredNorm() > r2) continue;
    out.points.points.push_back(r * d);
    out.covariances.push_back(r * map.covariances[i] * r.transpose());
  }
  return out;
}

}  // namespace

std::vector<EnvelopeCell> failure_envelope(const SyntheticWorld& world, const std::vector<double>& offsets,
                                           const std::vector<double>& yaws_deg, const std::vector<double>& radii,
                                           const EnvelopeOptions& options) {
  if (offsets.empty() || yaws_deg.empty() || radii.empty()) {
    throw std::invalid_argument("failure_envelope: sweep lists must be non-empty");
  }
  if (options.trials < 1) throw std::invalid_argument("failure_envelope: trials must be >= 1");
  for (double r : radii) {
    if (!(r > 0.0)) throw std::invalid_argument("failure_envelope: radii must be > 0");
  }
  options.gicp.validate();

  const Survey first = survey_world(world, options, 1);
  const Survey second = survey_world(world, options, 2);
  const PreparedMap map_a = prepare(first.map, options.gicp);
  const PreparedMap map_b = prepare(second.map, options.gicp);
  const std::size_t needed = static_cast<std::size_t>(options.gicp.k_neighbors) + 1;

  std::vector<EnvelopeCell> grid;
  for (double offset : offsets) {
    for (std::size_t yi = 0; yi < yaws_deg.size(); ++yi) {
      const double yaw_deg = yaws_deg[yi];
      for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        const double radius = radii[ri];
        // Seeded per (yaw, radius) only: every offset replays the same anchors, headings and
        // yaw signs, so cells along the offset axis differ by the offset alone.
        std::mt19937_64 rng(options.seed * 1000003ULL + yi * radii.size() + ri);
        std::uniform_int_distribution<std::size_t> pick(0, first.anchors.size() - 1);
        std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
        std::bernoulli_distribution flip(0.5);

        EnvelopeCell cell{offset, yaw_deg, radius, 0.0, 0.0, 0.0};
        int successes = 0;
        int measured = 0;
        for (int trial = 0; trial < options.trials; ++trial) {
          const Point3 p1 = first.anchors[pick(rng)];
          const double h = heading(rng);
          const Point3 p2 = p1 + offset * Point3(std::cos(h), std::sin(h), 0.0);
          const double delta = (flip(rng) ? 1.0 : -1.0) * yaw_deg * std::numbers::pi / 180.0;
          const Eigen::Matrix3d rot = yaw_matrix(delta);
          const RigidTransformd truth(rot.transpose(), p2 - p1);

          CovariantCloud s1 = sphere_local(map_a.cloud, p1, radius, Eigen::Matrix3d::Identity());
          const CovariantCloud s2 = sphere_local(map_b.cloud, p2, radius, rot);
          double error = std::numeric_limits<double>::infinity();
          const auto t0 = Clock::now();
          if (s1.size() >= needed && s2.size() >= needed) {
            const GicpTarget target(std::move(s1));
            const RegistrationResult res = gicp_align(s2, target, RigidTransformd::Identity(), options.gicp);
            error = evaluate(res.transform, truth).translation;
          }
          cell.mean_ms += elapsed_ms(t0);
          if (error < options.success_threshold) ++successes;
          if (std::isfinite(error)) {
            cell.mean_error += error;
            ++measured;
          }
        }
        cell.success_rate = static_cast<double>(successes) / options.trials;
        cell.mean_error = measured > 0 ? cell.mean_error / measured : std::numeric_limits<double>::quiet_NaN();
        cell.mean_ms /= options.trials;
        grid.push_back(cell);
      }
    }
  }
  return grid;
}

}  // namespace framekit
