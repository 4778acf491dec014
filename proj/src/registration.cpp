#include "framekit/registration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "framekit/parallel.hpp"

namespace framekit {

using gicp_detail::Jacobian;
using gicp_detail::Vector6d;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

void GicpConfig::validate() const {
  if (k_neighbors < 4) throw std::invalid_argument("GicpConfig: k_neighbors must be >= 4");
  if (!(max_correspondence_distance > 0.0)) throw std::invalid_argument("GicpConfig: max_correspondence_distance must be > 0");
  if (max_iterations <= 0) throw std::invalid_argument("GicpConfig: max_iterations must be > 0");
  if (!(translation_epsilon > 0.0) || !(rotation_epsilon > 0.0)) throw std::invalid_argument("GicpConfig: epsilons must be > 0");
  if (!(plane_regularization > 0.0)) throw std::invalid_argument("GicpConfig: plane_regularization must be > 0");
  if (!(voxel_leaf >= 0.0)) throw std::invalid_argument("GicpConfig: voxel_leaf must be >= 0");
}

namespace gicp_detail {

namespace {
Eigen::Matrix3d skew(const Point3& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

Eigen::Matrix3d exp_so3(const Point3& omega) {
  const double angle = omega.norm();
  if (angle < 1e-15) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}
}  // namespace

RigidTransformd apply_increment(const RigidTransformd& t, const Vector6d& delta, const Point3& pivot) {
  const Eigen::Matrix3d r = exp_so3(delta.head<3>());
  const Point3 offset = delta.tail<3>() + pivot - r * pivot;
  return RigidTransformd::Orthonormalized(r * t.rotation(), r * t.translation() + offset);
}

Jacobian residual_jacobian(const Point3& transformed, const Point3& pivot) {
  Jacobian j;
  j.leftCols<3>() = skew(transformed - pivot);
  j.rightCols<3>() = -Eigen::Matrix3d::Identity();
  return j;
}

Eigen::Matrix3d mahalanobis_weight(const Eigen::Matrix3d& cov_target, const Eigen::Matrix3d& cov_source,
                                   const Eigen::Matrix3d& rotation) {
  const Eigen::Matrix3d combined = cov_target + rotation * cov_source * rotation.transpose();
  return combined.inverse();
}

}  // namespace gicp_detail

CovariantCloud estimate_covariances(const PointCloud& cloud, int k, double plane_regularization) {
  if (k < 1) throw std::invalid_argument("estimate_covariances: k must be >= 1");
  if (cloud.size() < static_cast<std::size_t>(k) + 1) {
    throw std::invalid_argument("estimate_covariances: cloud has fewer than k + 1 points");
  }
  const KdTree3d tree(cloud.points);
  CovariantCloud out{cloud, std::vector<Eigen::Matrix3d>(cloud.size())};
  const Eigen::Vector3d regularized(plane_regularization, 1.0, 1.0);

  parallel_for(cloud.size(), [&](std::size_t i) {
    const auto neighbors = tree.knn(cloud.points[i], static_cast<std::size_t>(k));
    Point3 mean = Point3::Zero();
    for (const auto& n : neighbors) mean += cloud.points[n.index];
    mean /= static_cast<double>(neighbors.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const auto& n : neighbors) {
      const Point3 d = cloud.points[n.index] - mean;
      scatter += d * d.transpose();
    }
    scatter /= static_cast<double>(neighbors.size());
    // Ascending eigenvalues: the first eigenvector is the surface normal.
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    const Eigen::Matrix3d& v = eig.eigenvectors();
    Eigen::Matrix3d cov = v * regularized.asDiagonal() * v.transpose();
    out.covariances[i] = 0.5 * (cov + cov.transpose());
  });
  return out;
}

namespace {

Point3 centroid_of(const PointCloud& c) {
  Point3 sum = Point3::Zero();
  for (const auto& p : c.points) sum += p;
  return c.empty() ? sum : Point3(sum / static_cast<double>(c.size()));
}

struct Correspondence {
  std::uint32_t source;
  std::uint32_t target;
};

std::vector<Correspondence> find_correspondences(const CovariantCloud& source, const GicpTarget& target,
                                                 const RigidTransformd& t, double max_distance) {
  const double max_d2 = max_distance * max_distance;
  std::vector<std::int64_t> match(source.size(), -1);
  parallel_for(source.size(), [&](std::size_t i) {
    const Neighbor nn = target.tree().nearest(t * source.points.points[i]);
    if (nn.squared_distance <= max_d2) match[i] = static_cast<std::int64_t>(nn.index);
  });
  std::vector<Correspondence> out;
  out.reserve(source.size());
  for (std::size_t i = 0; i < match.size(); ++i) {
    if (match[i] >= 0) out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(match[i])});
  }
  return out;
}

struct Linearization {
  Matrix6d hessian = Matrix6d::Zero();
  Vector6d gradient = Vector6d::Zero();
  double cost = 0.0;
};

using Weights = std::vector<Eigen::Matrix3d>;

// Mahalanobis weights at the rotation of `t`, one per correspondence.
Weights compute_weights(const CovariantCloud& source, const GicpTarget& target, const RigidTransformd& t,
                        const std::vector<Correspondence>& corr) {
  Weights w(corr.size());
  parallel_for(corr.size(), [&](std::size_t c) {
    w[c] = gicp_detail::mahalanobis_weight(target.cloud().covariances[corr[c].target],
                                           source.covariances[corr[c].source], t.rotation());
  });
  return w;
}

Linearization linearize(const CovariantCloud& source, const GicpTarget& target, const RigidTransformd& t,
                        const std::vector<Correspondence>& corr, const Weights& weights, const Point3& pivot) {
  std::vector<Linearization> partial(max_chunks());
  const std::size_t used = parallel_chunks(corr.size(), [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    Linearization acc;
    for (std::size_t c = begin; c < end; ++c) {
      const auto [si, ti] = corr[c];
      const Point3 q = t * source.points.points[si];
      const Point3 d = target.cloud().points.points[ti] - q;
      const Eigen::Matrix3d& m = weights[c];
      const Jacobian j = gicp_detail::residual_jacobian(q, pivot);
      const Eigen::Matrix<double, 6, 3> jtm = j.transpose() * m;
      acc.hessian.noalias() += jtm * j;
      acc.gradient.noalias() += jtm * d;
      acc.cost += d.dot(m * d);
    }
    partial[chunk] = acc;
  });
  Linearization total;
  for (std::size_t c = 0; c < used; ++c) {
    total.hessian += partial[c].hessian;
    total.gradient += partial[c].gradient;
    total.cost += partial[c].cost;
  }
  return total;
}

double evaluate_cost(const CovariantCloud& source, const GicpTarget& target, const RigidTransformd& t,
                     const std::vector<Correspondence>& corr, const Weights& weights) {
  std::vector<double> partial(max_chunks(), 0.0);
  const std::size_t used = parallel_chunks(corr.size(), [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t c = begin; c < end; ++c) {
      const auto [si, ti] = corr[c];
      const Point3 d = target.cloud().points.points[ti] - t * source.points.points[si];
      acc += d.dot(weights[c] * d);
    }
    partial[chunk] = acc;
  });
  double total = 0.0;
  for (std::size_t c = 0; c < used; ++c) total += partial[c];
  return total;
}

constexpr std::size_t kMinCorrespondences = 10;
constexpr int kMaxDampingRetries = 12;

void finalize(RegistrationResult& result, const CovariantCloud& source, const GicpTarget& target, double max_distance) {
  const auto corr = find_correspondences(source, target, result.transform, max_distance);
  result.correspondence_count = corr.size();
  result.inlier_fraction = source.size() == 0 ? 0.0 : static_cast<double>(corr.size()) / static_cast<double>(source.size());
  result.final_cost = corr.empty() ? 0.0
                                    : evaluate_cost(source, target, result.transform, corr,
                                                    compute_weights(source, target, result.transform, corr)) /
                                          static_cast<double>(corr.size());
  if (corr.size() < kMinCorrespondences) result.converged = false;
}

}  // namespace

GicpTarget::GicpTarget(CovariantCloud cloud)
    : cloud_(std::move(cloud)), tree_(cloud_.points.points), centroid_(centroid_of(cloud_.points)) {}

RegistrationResult gicp_align(const CovariantCloud& source, const GicpTarget& target, const RigidTransformd& init,
                              const GicpConfig& cfg) {
  cfg.validate();
  RegistrationResult result;
  result.transform = init;
  const Point3 pivot = target.centroid();
  double lambda = 1e-3;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    result.iterations = iter + 1;
    const auto corr = find_correspondences(source, target, result.transform, cfg.max_correspondence_distance);
    if (corr.size() < kMinCorrespondences) {
      result.converged = false;
      break;
    }
    // Weights stay frozen at the linearization rotation while damping is tuned, so the
    // acceptance test judges the same quadratic model the step was solved on.
    const Weights weights = compute_weights(source, target, result.transform, corr);
    const Linearization lin = linearize(source, target, result.transform, corr, weights, pivot);
    const Vector6d diag = lin.hessian.diagonal().cwiseMax(1e-9 * std::max(1.0, lin.hessian.diagonal().maxCoeff()));

    bool accepted = false;
    Vector6d delta = Vector6d::Zero();
    for (int attempt = 0; attempt < kMaxDampingRetries; ++attempt) {
      Matrix6d damped = lin.hessian;
      damped.diagonal() += lambda * diag;
      delta = damped.ldlt().solve(-lin.gradient);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const RigidTransformd candidate = gicp_detail::apply_increment(result.transform, delta, pivot);
      const double cost = evaluate_cost(source, target, candidate, corr, weights);
      if (cost <= lin.cost) {
        result.accepted_steps.push_back({lin.cost, cost});
        result.transform = candidate;
        lambda = std::max(lambda * 0.5, 1e-9);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }

    // No damping level lowers the cost: the current correspondences are at a minimum.
    if (!accepted) {
      result.converged = true;
      break;
    }
    if (delta.head<3>().norm() < cfg.rotation_epsilon && delta.tail<3>().norm() < cfg.translation_epsilon) {
      result.converged = true;
      break;
    }
  }

  finalize(result, source, target, cfg.max_correspondence_distance);
  return result;
}

RegistrationResult gicp_align(const PointCloud& source, const PointCloud& target, const RigidTransformd& init,
                              const GicpConfig& cfg) {
  cfg.validate();
  const PointCloud src = cfg.voxel_leaf > 0.0 ? voxel_downsample(source, cfg.voxel_leaf) : source;
  const PointCloud tgt = cfg.voxel_leaf > 0.0 ? voxel_downsample(target, cfg.voxel_leaf) : target;
  const std::size_t needed = static_cast<std::size_t>(cfg.k_neighbors) + 1;
  if (src.size() < needed || tgt.size() < needed) {
    throw std::invalid_argument("gicp_align: clouds need at least k_neighbors + 1 points after downsampling");
  }
  const GicpTarget prepared(estimate_covariances(tgt, cfg.k_neighbors, cfg.plane_regularization));
  return gicp_align(estimate_covariances(src, cfg.k_neighbors, cfg.plane_regularization), prepared, init, cfg);
}

RegistrationResult icp_point_oracle(const PointCloud& source, const PointCloud& target, const RigidTransformd& init,
                                    const IcpOptions& opts) {
  constexpr std::size_t kMaxPoints = 5000;
  if (source.size() > kMaxPoints || target.size() > kMaxPoints) {
    throw std::invalid_argument("icp_point_oracle: clouds limited to 5000 points");
  }
  if (source.empty() || target.empty()) throw std::invalid_argument("icp_point_oracle: empty cloud");

  RegistrationResult result;
  result.transform = init;
  const double max_d2 = opts.max_correspondence_distance * opts.max_correspondence_distance;
  std::vector<std::int64_t> match(source.size());

  auto match_all = [&](const RigidTransformd& t) {
    std::size_t count = 0;
    double cost = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      const Point3 q = t * source.points[i];
      double best = std::numeric_limits<double>::infinity();
      std::int64_t best_j = -1;
      for (std::size_t j = 0; j < target.size(); ++j) {
        const double d2 = (target.points[j] - q).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_j = static_cast<std::int64_t>(j);
        }
      }
      match[i] = best <= max_d2 ? best_j : -1;
      if (match[i] >= 0) {
        ++count;
        cost += best;
      }
    }
    return std::pair{count, cost};
  };

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    result.iterations = iter + 1;
    const std::size_t count = match_all(result.transform).first;
    if (count < kMinCorrespondences) {
      result.converged = false;
      break;
    }
    Point3 mean_q = Point3::Zero(), mean_b = Point3::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (match[i] < 0) continue;
      mean_q += result.transform * source.points[i];
      mean_b += target.points[static_cast<std::size_t>(match[i])];
    }
    mean_q /= static_cast<double>(count);
    mean_b /= static_cast<double>(count);
    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (match[i] < 0) continue;
      cross += (result.transform * source.points[i] - mean_q) *
               (target.points[static_cast<std::size_t>(match[i])] - mean_b).transpose();
    }
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
    fix(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    const Eigen::Matrix3d r = svd.matrixV() * fix * svd.matrixU().transpose();
    const RigidTransformd step = RigidTransformd::Orthonormalized(r, mean_b - r * mean_q);
    const RigidTransformd next = step * result.transform;
    result.transform = RigidTransformd::Orthonormalized(next.rotation(), next.translation());

    const double angle = Eigen::AngleAxisd(step.rotation()).angle();
    if (angle < opts.rotation_epsilon && step.translation().norm() < opts.translation_epsilon) {
      result.converged = true;
      break;
    }
  }

  const auto [count, cost] = match_all(result.transform);
  result.correspondence_count = count;
  result.inlier_fraction = static_cast<double>(count) / static_cast<double>(source.size());
  result.final_cost = count == 0 ? 0.0 : cost / static_cast<double>(count);
  if (count < kMinCorrespondences) result.converged = false;
  return result;
}

}  // namespace framekit
