#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "framekit/geom.hpp"
#include "framekit/kdtree.hpp"

namespace framekit {

struct GicpConfig {
  int k_neighbors = 20;
  double max_correspondence_distance = 1.0;
  int max_iterations = 64;
  double translation_epsilon = 1e-4;
  double rotation_epsilon = 1e-4;
  double plane_regularization = 1e-3;
  /// Voxel leaf applied to both clouds before registration; 0 disables downsampling.
  double voxel_leaf = 0.5;

  void validate() const;
};

/// Points with plane-regularized per-point covariances.
struct CovariantCloud {
  PointCloud points;
  std::vector<Eigen::Matrix3d> covariances;

  [[nodiscard]] std::size_t size() const { return points.size(); }
};

struct CostStep {
  double before = 0.0;
  double after = 0.0;
};

struct RegistrationResult {
  RigidTransformd transform;
  bool converged = false;
  int iterations = 0;
  /// Mean per-correspondence Mahalanobis cost at the final transform.
  double final_cost = 0.0;
  std::size_t correspondence_count = 0;
  /// Fraction of (downsampled) source points with a correspondence at the final transform.
  double inlier_fraction = 0.0;
  /// Cost before/after each accepted step, both evaluated on that step's correspondences.
  std::vector<CostStep> accepted_steps;
};

/// Scatter of the k nearest neighbors (the point included), eigen-decomposed and rebuilt with
/// eigenvalues (plane_regularization, 1, 1) in ascending order. Needs at least k + 1 points.
CovariantCloud estimate_covariances(const PointCloud& cloud, int k, double plane_regularization = 1e-3);

/// Target side of a registration: covariances plus a search tree, reusable across calls.
class GicpTarget {
 public:
  explicit GicpTarget(CovariantCloud cloud);

  [[nodiscard]] const CovariantCloud& cloud() const { return cloud_; }
  [[nodiscard]] const KdTree3d& tree() const { return tree_; }
  [[nodiscard]] const Point3& centroid() const { return centroid_; }

 private:
  CovariantCloud cloud_;
  KdTree3d tree_;
  Point3 centroid_ = Point3::Zero();
};

/// Generalized-ICP: estimates T (source -> target frame) minimizing
/// sum d_i^T (C_b + R C_a R^T)^{-1} d_i with d_i = b_i - T a_i, starting from `init`.
/// Both clouds are downsampled with cfg.voxel_leaf first.
RegistrationResult gicp_align(const PointCloud& source, const PointCloud& target, const RigidTransformd& init,
                              const GicpConfig& cfg = {});

/// Same, on preprocessed inputs (no downsampling or covariance estimation).
RegistrationResult gicp_align(const CovariantCloud& source, const GicpTarget& target, const RigidTransformd& init,
                              const GicpConfig& cfg = {});

struct IcpOptions {
  int max_iterations = 200;
  double translation_epsilon = 1e-10;
  double rotation_epsilon = 1e-10;
  double max_correspondence_distance = std::numeric_limits<double>::infinity();
};

/// Point-to-point ICP with brute-force nearest neighbors and the closed-form Procrustes step.
/// Validation oracle; O(n * m) per iteration, limited to 5000 points per cloud.
RegistrationResult icp_point_oracle(const PointCloud& source, const PointCloud& target, const RigidTransformd& init,
                                    const IcpOptions& opts = {});

namespace gicp_detail {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Jacobian = Eigen::Matrix<double, 3, 6>;

/// Tangent update about `pivot`: Trans(pivot) * [Exp(omega), v] * Trans(-pivot) * t,
/// with delta = (omega, v).
RigidTransformd apply_increment(const RigidTransformd& t, const Vector6d& delta, const Point3& pivot);

/// d(b - q') / d delta at delta = 0, where q = T a is the transformed source point.
Jacobian residual_jacobian(const Point3& transformed, const Point3& pivot);

/// (C_b + R C_a R^T)^{-1}
Eigen::Matrix3d mahalanobis_weight(const Eigen::Matrix3d& cov_target, const Eigen::Matrix3d& cov_source,
                                   const Eigen::Matrix3d& rotation);

}  // namespace gicp_detail

}  // namespace framekit
