#include "framekit/geom.hpp"

#include <cstdint>
#include <unordered_map>

namespace framekit {

void PointCloud::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!is_finite(points[i])) {
      throw std::invalid_argument("PointCloud: non-finite coordinate at point " + std::to_string(i));
    }
  }
}

RigidTransformd yaw_rotation(double psi) {
  if (!std::isfinite(psi)) throw std::invalid_argument("yaw_rotation: non-finite angle");
  return RigidTransformd(yaw_matrix(psi), Point3::Zero());
}

PointCloud apply(const RigidTransformd& t, const PointCloud& cloud, const std::string& target_frame) {
  PointCloud out;
  out.frame = target_frame.empty() ? cloud.frame : target_frame;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t * p);
  return out;
}

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    // Teschner et al. spatial hash primes.
    return static_cast<std::size_t>(k.x * 73856093LL ^ k.y * 19349669LL ^ k.z * 83492791LL);
  }
};

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double leaf) {
  if (!(leaf > 0.0) || !std::isfinite(leaf)) throw std::invalid_argument("voxel_downsample: leaf must be > 0");

  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> bucket_of;
  bucket_of.reserve(cloud.size());
  std::vector<Point3> sums;
  std::vector<std::size_t> counts;

  for (const auto& p : cloud.points) {
    const VoxelKey key{static_cast<std::int64_t>(std::floor(p.x() / leaf)),
                       static_cast<std::int64_t>(std::floor(p.y() / leaf)),
                       static_cast<std::int64_t>(std::floor(p.z() / leaf))};
    auto [it, inserted] = bucket_of.try_emplace(key, sums.size());
    if (inserted) {
      sums.push_back(p);
      counts.push_back(1);
    } else {
      sums[it->second] += p;
      ++counts[it->second];
    }
  }

  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    // A single member is kept bit-exact so repeated downsampling is stable.
    out.points.push_back(counts[i] == 1 ? sums[i] : Point3(sums[i] / static_cast<double>(counts[i])));
  }
  return out;
}

}  // namespace framekit
