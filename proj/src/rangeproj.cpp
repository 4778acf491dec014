#include "framekit/rangeproj.hpp"

#include <algorithm>

namespace framekit {

void ProjectionModel::validate() const {
  if (width < 8 || height < 2) throw std::invalid_argument("ProjectionModel: width >= 8 and height >= 2 required");
  if (!(fov() > 0.0) || !std::isfinite(fov())) throw std::invalid_argument("ProjectionModel: fov_up + fov_down must be > 0");
  if (!(max_range > 0.0) || !std::isfinite(max_range)) throw std::invalid_argument("ProjectionModel: max_range must be > 0");
}

double ProjectionModel::column_azimuth(int u) const {
  // Inverse of u = (1 - azimuth / pi) * w / 2 at the column center.
  return std::numbers::pi * (1.0 - 2.0 * (u + 0.5) / width);
}

double ProjectionModel::row_elevation(int v) const { return (1.0 - (v + 0.5) / height) * fov() - fov_up; }

std::optional<PixelCoord> project_point(const Point3& p, const ProjectionModel& model) {
  const double r = p.norm();
  if (!(r > 0.0) || r > model.max_range) return std::nullopt;
  const double elevation = std::asin(std::clamp(p.z() / r, -1.0, 1.0));
  if (elevation > model.fov_up || elevation < -model.fov_down) return std::nullopt;

  const double azimuth = std::atan2(p.y(), p.x());
  const double u = 0.5 * (1.0 - azimuth / std::numbers::pi) * model.width;
  const double v = (1.0 - (elevation + model.fov_up) / model.fov()) * model.height;
  return PixelCoord{std::clamp(static_cast<int>(std::floor(u)), 0, model.width - 1),
                    std::clamp(static_cast<int>(std::floor(v)), 0, model.height - 1)};
}

RangeImage project(const PointCloud& cloud, const ProjectionModel& model) {
  model.validate();
  if (cloud.empty()) throw std::invalid_argument("project: empty cloud");

  RangeImage img{model, Eigen::MatrixXd::Zero(model.height, model.width)};
  for (const auto& p : cloud.points) {
    const auto pixel = project_point(p, model);
    if (!pixel) continue;
    double& cell = img.ranges(pixel->v, pixel->u);
    const double r = p.norm();
    if (cell == 0.0 || r < cell) cell = r;
  }
  return img;
}

Eigen::VectorXd column_signature(const RangeImage& img) {
  const Eigen::Index w = img.ranges.cols();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(w);
  for (Eigen::Index u = 0; u < w; ++u) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index v = 0; v < img.ranges.rows(); ++v) {
      const double r = img.ranges(v, u);
      if (r > 0.0) {
        sum += r;
        ++count;
      }
    }
    if (count > 0) out(u) = sum / count;
  }
  return out;
}

}  // namespace framekit
