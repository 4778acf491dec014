#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "framekit/keyframe.hpp"
#include "framekit/overlap.hpp"
#include "framekit/registration.hpp"
#include "framekit/synthworld.hpp"

namespace framekit {

/// Transform error against ground truth. Rotation error in two forms: ||R_gt R^-1 - I||_F
/// and the geodesic angle in degrees.
struct TransformError {
  double translation = 0.0;
  double rotation_frob = 0.0;
  double rotation_deg = 0.0;
};

TransformError evaluate(const RigidTransformd& transform, const RigidTransformd& gt);

/// Yaw from the orientation vectors, translation taking pose p2 onto pose p1 under that yaw.
RigidTransformd initial_transform(const Pose3& p1, const Pose3& p2, const OrientationDescriptor& w1,
                                  const OrientationDescriptor& w2);

/// Sphere radius from the spacing between keyframe k and its predecessor (successor for k = 0).
double adaptive_radius(const Trajectory& traj, std::size_t k);

/// Radius tiers applied to a keyframe spacing l.
double radius_for_spacing(double l);

/// Points m with ||m - center||^2 <= r^2, in input order.
PointCloud sample_sphere(const PointCloud& map, const Point3& center, double r);

struct StageTimings {
  double query_ms = 0.0;   ///< index build, overlap search, yaw regression
  double sample_ms = 0.0;  ///< radii and sphere extraction
  double gicp_ms = 0.0;
  double union_ms = 0.0;
  double total_ms = 0.0;
};

struct MergeOptions {
  GicpConfig gicp;
  /// Registrations leaving fewer matched source points than this are treated as failures.
  double min_inlier_fraction = 0.3;
  /// Tighter correspondence gate when the matched poses are already close.
  bool tight_correspondence = true;
  double tight_pose_distance = 2.0;
  double tight_max_correspondence = 0.5;
  /// Optional voxel filter on the merged map (off: plain union).
  bool downsample_union = false;
  double union_leaf = 0.1;
};

struct MergeReport {
  RigidTransformd transform;
  RigidTransformd initial;
  OverlapMatch match;
  double radius1 = 0.0;
  double radius2 = 0.0;
  std::size_t sample1_size = 0;
  std::size_t sample2_size = 0;
  RegistrationResult registration;
  bool converged = false;
  PointCloud merged_map;
  StageTimings timings;
  std::optional<TransformError> errors;
};

/// Raised when a merge cannot produce a trustworthy transform. Carries whatever the
/// pipeline had computed (match, radii, T_0, registration result) up to that point.
class MergeFailure : public std::runtime_error {
 public:
  MergeFailure(const std::string& what, MergeReport partial, std::size_t step = 0)
      : std::runtime_error(what), partial_(std::move(partial)), step_(step) {}

  [[nodiscard]] const MergeReport& partial() const { return partial_; }
  /// 1-based merge step within a sequence (1 for a pairwise merge).
  [[nodiscard]] std::size_t step() const { return step_; }

 private:
  MergeReport partial_;
  std::size_t step_;
};

/// Merges log2 into the frame of log1. `gt`, when given, is the true 1T2 used for errors.
MergeReport merge_pair(const KeyframeLog& log1, const KeyframeLog& log2, const MergeOptions& options = {},
                       const std::optional<RigidTransformd>& gt = std::nullopt);

struct SequenceReport {
  std::vector<MergeReport> steps;
  /// 1T_n for n = 2..N, in input order.
  std::vector<RigidTransformd> transforms;
  PointCloud global_map;
};

/// Folds merge_pair left to right. The running union (maps, concatenated stacks, trajectories
/// and orientation vectors re-expressed in frame 1) stands in for log1 at each step.
/// `world_from_map`, when given, holds one ground-truth frame pose per log.
/// Step failures are rethrown as MergeFailure with the 1-based step index. `on_step` sees
/// each completed step (its merged_map already moved into the running union).
/// SequenceReport::steps keep empty merged maps; the union is global_map.
using StepCallback = std::function<void(std::size_t step, const MergeReport&)>;
SequenceReport merge_sequence(const std::vector<KeyframeLog>& logs, const MergeOptions& options = {},
                              const std::optional<std::vector<RigidTransformd>>& world_from_map = std::nullopt,
                              const StepCallback& on_step = {});

/// Moves a log into another frame: map, poses, yaw and orientation vectors.
KeyframeLog transform_log(const KeyframeLog& log, const RigidTransformd& t);

struct EnvelopeOptions {
  int trials = 20;
  double success_threshold = 0.3;
  std::uint64_t seed = 1;
  /// No correspondence gate by default: the study probes the basin of the raw objective, and
  /// a 1 m gate would cut every point a 20 degree yaw moves further than that.
  GicpConfig gicp = [] {
    GicpConfig g;
    g.max_correspondence_distance = std::numeric_limits<double>::infinity();
    return g;
  }();
  /// Survey missions simulate only segments at least this long.
  double min_segment_length = 10.0;
};

struct EnvelopeCell {
  double offset = 0.0;
  double yaw_deg = 0.0;
  double radius = 0.0;
  double success_rate = 0.0;
  double mean_error = 0.0;
  double mean_ms = 0.0;
};

/// GICP robustness sweep. Two independent noisy surveys of `world` provide the maps; each
/// trial picks a survey keyframe p1, a second center p2 at `offset` in a random horizontal
/// direction, and registers the second sphere, rotated by `yaw` about p2, onto the first from
/// an identity start. Success: translation error below options.success_threshold.
std::vector<EnvelopeCell> failure_envelope(const SyntheticWorld& world, const std::vector<double>& offsets,
                                           const std::vector<double>& yaws_deg, const std::vector<double>& radii,
                                           const EnvelopeOptions& options = {});

}  // namespace framekit
