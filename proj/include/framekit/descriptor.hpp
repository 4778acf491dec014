#pragma once

#include <utility>

#include <Eigen/Core>

#include "framekit/errors.hpp"
#include "framekit/rangeproj.hpp"

namespace framekit {

inline constexpr int kDescriptorSize = 64;
using DescriptorVector = Eigen::Matrix<double, kDescriptorSize, 1>;

/// Orientation-invariant place vector, unit L2 norm.
struct PlaceDescriptor {
  DescriptorVector values = DescriptorVector::Zero();
};

/// Mean range per azimuthal sector in meters. Sector j covers the image columns mapped to it.
struct OrientationDescriptor {
  DescriptorVector values = DescriptorVector::Zero();
};

struct DescriptorPair {
  PlaceDescriptor place;
  OrientationDescriptor orientation;
};

/// Anything turning a range image into a (place, orientation) pair whose place vectors live
/// in a Euclidean space and whose orientation vectors support yaw regression.
class DescriptorExtractor {
 public:
  virtual ~DescriptorExtractor() = default;
  [[nodiscard]] virtual DescriptorPair extract(const RangeImage& img) const = 0;
};

/// Fourier-magnitude + range-histogram extractor.
///
/// The orientation vector is the column signature pooled to 64 sectors. The place vector
/// concatenates the magnitudes of DFT bins 0..31 of that signature (invariant to circular
/// shifts, hence to yaw) with a 32-bin histogram of all nonzero ranges over (0, max_range],
/// each range voting linearly into its two nearest bins.
/// Each half is unit-normalized before the whole vector is, so neither half dominates.
class SpectralExtractor final : public DescriptorExtractor {
 public:
  [[nodiscard]] DescriptorPair extract(const RangeImage& img) const override;
};

/// Shorthand for SpectralExtractor{}.extract(img). Throws DegenerateInput on an all-zero image.
DescriptorPair extract(const RangeImage& img);

/// Pools (or nearest-upsamples) a column signature to 64 sectors.
DescriptorVector pool_to_sectors(const Eigen::VectorXd& signature);

/// Magnitudes of the first `bins` DFT coefficients.
Eigen::VectorXd dft_magnitudes(const DescriptorVector& signal, int bins);

/// Yaw that rotates the cloud behind `w2` onto the cloud behind `w1`, in (-pi, pi].
/// Resolution is 2*pi/64; argmax of zero-mean, unit-variance circular cross-correlation,
/// ties resolved towards the smallest |yaw|.
double yaw_discrepancy(const OrientationDescriptor& w1, const OrientationDescriptor& w2);

/// Orientation vector of the same scene seen after rotating the cloud by `yaw`,
/// i.e. a circular shift by -yaw * 64 / (2 pi) sectors (rounded).
OrientationDescriptor rotate_orientation(const OrientationDescriptor& w, double yaw);

/// Circular shift: out[j] = in[(j - shift) mod 64].
DescriptorVector circular_shift(const DescriptorVector& in, int shift);

inline double descriptor_distance(const PlaceDescriptor& a, const PlaceDescriptor& b) {
  return (a.values - b.values).norm();
}

}  // namespace framekit
