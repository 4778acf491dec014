#include "framekit/keyframe.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace framekit {

double mean_range(const PointCloud& scan) {
  if (scan.empty()) throw std::invalid_argument("mean_range: empty scan");
  double sum = 0.0;
  for (const auto& p : scan.points) sum += p.norm();
  return sum / static_cast<double>(scan.size());
}

std::pair<double, SpaciousnessState> update_spaciousness(const SpaciousnessState& state, const PointCloud& scan) {
  const double s_now = mean_range(scan);
  SpaciousnessState next = state;
  const double s_prev = state.primed ? state.s_prev : s_now;
  const double s_k = state.alpha * s_prev + state.beta * s_now;
  next.s_prev = s_k;
  next.primed = true;
  return {s_k, next};
}

double sampling_threshold(double s_k) {
  if (!(s_k >= 0.0)) throw std::invalid_argument("sampling_threshold: spaciousness must be >= 0");
  if (s_k > 10.0) return 10.0;
  if (s_k > 6.0) return 6.0;
  if (s_k > 3.0) return 3.0;
  return s_k;
}

std::optional<std::size_t> nearest_keyframe(const KeyframeLog& log, const Point3& position) {
  // Logs hold at most a few hundred keyframes; a linear scan is exact and cheaper than
  // rebuilding a tree after every append.
  std::optional<std::size_t> best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log.trajectory.size(); ++i) {
    const double d2 = (log.trajectory[i].position - position).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

bool should_sample(const KeyframeLog& log, const Pose3& pose, double th_k, double rot_threshold) {
  if (!(th_k >= 0.0)) throw std::invalid_argument("should_sample: threshold must be >= 0");
  const auto nearest = nearest_keyframe(log, pose.position);
  if (!nearest) return true;

  const Pose3& ref = log.trajectory[*nearest];
  // Slack absorbs rounding when the walk lands exactly on the threshold.
  if ((ref.position - pose.position).norm() >= th_k - 1e-9) return true;
  if (pose.yaw && ref.yaw && std::abs(normalize_angle(*pose.yaw - *ref.yaw)) > rot_threshold) return true;
  return false;
}

KeyframeLog append_keyframe(KeyframeLog log, const Pose3& pose, const PlaceDescriptor& q,
                            const OrientationDescriptor& w, const PointCloud& scan, double th_k) {
  if (!log.consistent()) throw std::logic_error("append_keyframe: keyframe stacks out of sync");
  log.trajectory.push_back(pose);
  log.place_stack.push_back(q);
  log.orient_stack.push_back(w);
  log.thresholds.push_back(th_k);
  log.map.points.insert(log.map.points.end(), scan.points.begin(), scan.points.end());
  return log;
}

}  // namespace framekit
