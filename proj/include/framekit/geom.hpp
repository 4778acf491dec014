#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace framekit {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Point3 = Vector3<double>;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar normalize_angle(Scalar angle) {
  constexpr Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  Scalar wrapped = std::fmod(angle, two_pi);
  if (wrapped <= -std::numbers::pi_v<Scalar>) wrapped += two_pi;
  if (wrapped > std::numbers::pi_v<Scalar>) wrapped -= two_pi;
  return wrapped;
}

inline bool is_finite(const Point3& p) { return p.allFinite(); }

/// Unordered point set in meters, tagged with the frame it is expressed in.
struct PointCloud {
  std::vector<Point3> points;
  std::string frame;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
  /// Throws std::invalid_argument on the first NaN/Inf component.
  void validate() const;
};

struct Pose3 {
  Point3 position = Point3::Zero();
  std::optional<double> yaw;
};

/// Poses indexed by keyframe index, in acquisition order.
using Trajectory = std::vector<Pose3>;

/// Element of SE(3) stored as a full rotation matrix plus translation.
template <typename Scalar>
class RigidTransform {
 public:
  using Mat3 = Matrix3<Scalar>;
  using Vec3 = Vector3<Scalar>;

  static constexpr Scalar kTolerance = Scalar(1e-9);

  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  /// Throws std::invalid_argument unless `rotation` is orthonormal with det +1.
  RigidTransform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    if (!is_rotation(rotation_) || !translation_.allFinite()) {
      throw std::invalid_argument("RigidTransform: rotation is not in SO(3) or translation is not finite");
    }
  }

  static RigidTransform Identity() { return {}; }

  static RigidTransform Translation(const Vec3& t) { return RigidTransform(Mat3::Identity(), t); }

  /// Projects an approximately orthonormal matrix onto SO(3) before construction.
  static RigidTransform Orthonormalized(const Mat3& rotation, const Vec3& translation) {
    Eigen::Quaternion<Scalar> q(rotation);
    q.normalize();
    return RigidTransform(q.toRotationMatrix(), translation);
  }

  static bool is_rotation(const Mat3& r, Scalar tol = kTolerance) {
    if (!r.allFinite()) return false;
    const Scalar ortho = (r.transpose() * r - Mat3::Identity()).norm();
    return ortho < tol && std::abs(r.determinant() - Scalar(1)) < tol;
  }

  [[nodiscard]] const Mat3& rotation() const { return rotation_; }
  [[nodiscard]] const Vec3& translation() const { return translation_; }

  [[nodiscard]] Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }

  /// Applies `other` first, then `*this`.
  [[nodiscard]] RigidTransform operator*(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation_ = rotation_ * other.rotation_;
    out.translation_ = rotation_ * other.translation_ + translation_;
    return out;
  }

  [[nodiscard]] RigidTransform inverse() const {
    RigidTransform out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(out.rotation_ * translation_);
    return out;
  }

  /// Heading of the rotated x axis projected on the xy plane.
  [[nodiscard]] Scalar yaw() const { return std::atan2(rotation_(1, 0), rotation_(0, 0)); }

  template <typename Other>
  [[nodiscard]] RigidTransform<Other> cast() const {
    return RigidTransform<Other>::Orthonormalized(rotation_.template cast<Other>(),
                                                  translation_.template cast<Other>());
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

using RigidTransformd = RigidTransform<double>;

template <typename Scalar>
Matrix3<Scalar> yaw_matrix(Scalar psi) {
  const Scalar c = std::cos(psi);
  const Scalar s = std::sin(psi);
  Matrix3<Scalar> r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

/// Rotation about +z by `psi` with zero translation. Throws on non-finite input.
RigidTransformd yaw_rotation(double psi);

/// Maps every point m to R*m + t. An empty `target_frame` keeps the source label.
PointCloud apply(const RigidTransformd& t, const PointCloud& cloud, const std::string& target_frame = {});

inline RigidTransformd compose(const RigidTransformd& a, const RigidTransformd& b) { return a * b; }
inline RigidTransformd inverse(const RigidTransformd& t) { return t.inverse(); }

/// One centroid per occupied voxel of edge `leaf`, buckets keyed by floor(coord / leaf).
/// Output order follows the first occurrence of each bucket in the input.
PointCloud voxel_downsample(const PointCloud& cloud, double leaf);

}  // namespace framekit
