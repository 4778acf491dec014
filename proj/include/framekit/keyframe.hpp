#pragma once

#include <numbers>
#include <utility>
#include <vector>

#include "framekit/descriptor.hpp"
#include "framekit/geom.hpp"

namespace framekit {

inline constexpr double kDefaultRotationThreshold = 30.0 * std::numbers::pi / 180.0;

/// Exponentially smoothed mean scan range: s_k = alpha * s_{k-1} + beta * S_k.
struct SpaciousnessState {
  double s_prev = 0.0;
  double alpha = 0.9;
  double beta = 0.1;
  /// An unprimed state seeds s_prev with the first scan's mean range.
  bool primed = false;

  static SpaciousnessState from(double s_prev) { return {s_prev, 0.9, 0.1, true}; }
};

/// Mean Euclidean norm of the points of a sensor-frame scan. Throws on an empty scan.
double mean_range(const PointCloud& scan);

/// Returns (s_k, updated state). Throws std::invalid_argument on an empty scan.
std::pair<double, SpaciousnessState> update_spaciousness(const SpaciousnessState& state, const PointCloud& scan);

/// Piecewise translational sampling threshold in meters.
double sampling_threshold(double s_k);

/// One agent's synchronized keyframe stacks and accumulated map.
struct KeyframeLog {
  Trajectory trajectory;
  std::vector<PlaceDescriptor> place_stack;
  std::vector<OrientationDescriptor> orient_stack;
  PointCloud map;
  std::vector<double> thresholds;

  [[nodiscard]] std::size_t size() const { return trajectory.size(); }
  [[nodiscard]] bool empty() const { return trajectory.empty(); }
  [[nodiscard]] bool consistent() const {
    const std::size_t n = trajectory.size();
    return place_stack.size() == n && orient_stack.size() == n && thresholds.size() == n;
  }
};

/// Index of the keyframe closest to `position`, or std::nullopt for an empty log.
std::optional<std::size_t> nearest_keyframe(const KeyframeLog& log, const Point3& position);

/// True when the nearest keyframe is at least th_k away, or its yaw differs by more than
/// `rot_threshold`. The first pose of a log is always sampled.
bool should_sample(const KeyframeLog& log, const Pose3& pose, double th_k,
                   double rot_threshold = kDefaultRotationThreshold);

/// Extends all stacks by one and appends the registered scan to the map (no dedup).
KeyframeLog append_keyframe(KeyframeLog log, const Pose3& pose, const PlaceDescriptor& q,
                            const OrientationDescriptor& w, const PointCloud& scan, double th_k);

}  // namespace framekit
