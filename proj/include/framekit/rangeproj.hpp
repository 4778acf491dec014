#pragma once

#include <Eigen/Core>

#include "framekit/geom.hpp"

namespace framekit {

/// Spherical projection parameters. Angles in radians, both FOV halves positive.
struct ProjectionModel {
  int width = 64;
  int height = 16;
  double fov_up = std::numbers::pi / 8.0;
  double fov_down = std::numbers::pi / 8.0;
  double max_range = 50.0;

  [[nodiscard]] double fov() const { return fov_up + fov_down; }
  void validate() const;

  /// Azimuth (atan2 convention) at the horizontal center of column u.
  [[nodiscard]] double column_azimuth(int u) const;
  /// Elevation at the vertical center of row v.
  [[nodiscard]] double row_elevation(int v) const;
};

/// height x width grid of ranges; row v, column u. Zero marks "no return".
struct RangeImage {
  ProjectionModel model;
  Eigen::MatrixXd ranges;

  [[nodiscard]] double at(int u, int v) const { return ranges(v, u); }
  [[nodiscard]] bool has_returns() const { return (ranges.array() > 0.0).any(); }
};

struct PixelCoord {
  int u = 0;
  int v = 0;
};

/// Pixel for a point with nonzero range inside the vertical FOV; std::nullopt otherwise.
std::optional<PixelCoord> project_point(const Point3& p, const ProjectionModel& model);

/// Projects a sensor-frame cloud, keeping the minimum range per pixel.
/// Throws std::invalid_argument on an empty cloud.
RangeImage project(const PointCloud& cloud, const ProjectionModel& model);

/// Mean of the nonzero ranges of each column, 0 for empty columns.
Eigen::VectorXd column_signature(const RangeImage& img);

}  // namespace framekit
