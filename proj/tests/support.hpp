#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "framekit/geom.hpp"

namespace test {

inline constexpr double kPi = std::numbers::pi;
inline double deg(double d) { return d * kPi / 180.0; }

inline framekit::PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent = 10.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  framekit::PointCloud c;
  c.frame = "test";
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

inline framekit::RigidTransformd random_transform(std::mt19937_64& rng, double max_translation = 10.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-max_translation, max_translation);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return framekit::RigidTransformd(q.toRotationMatrix(), framekit::Point3(u(rng), u(rng), u(rng)));
}

inline double transform_gap(const framekit::RigidTransformd& a, const framekit::RigidTransformd& b) {
  return (a.rotation() - b.rotation()).norm() + (a.translation() - b.translation()).norm();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("framekit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
