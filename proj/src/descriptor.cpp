#include "framekit/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace framekit {

namespace {

constexpr int kSpectrumBins = kDescriptorSize / 2;
constexpr int kHistogramBins = kDescriptorSize / 2;

Eigen::VectorXd range_histogram(const RangeImage& img) {
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(kHistogramBins);
  const double max_range = img.model.max_range;
  const double width = max_range / kHistogramBins;
  for (Eigen::Index i = 0; i < img.ranges.size(); ++i) {
    const double r = img.ranges.data()[i];
    if (!(r > 0.0) || r > max_range) continue;
    // Linear vote between the two nearest bin centers, so a range drifting across a bin
    // edge moves its mass gradually.
    const double pos = std::clamp(r / width - 0.5, 0.0, double(kHistogramBins - 1));
    const int lo = std::min(static_cast<int>(pos), kHistogramBins - 1);
    const int hi = std::min(lo + 1, kHistogramBins - 1);
    const double frac = pos - lo;
    hist(lo) += 1.0 - frac;
    hist(hi) += frac;
  }
  return hist;
}

Eigen::VectorXd unit(const Eigen::VectorXd& v) {
  const double n = v.norm();
  return n > 0.0 ? Eigen::VectorXd(v / n) : v;
}

}  // namespace

DescriptorVector pool_to_sectors(const Eigen::VectorXd& signature) {
  const auto width = static_cast<int>(signature.size());
  if (width <= 0) throw std::invalid_argument("pool_to_sectors: empty signature");
  DescriptorVector out = DescriptorVector::Zero();
  if (width == kDescriptorSize) return signature;

  if (width > kDescriptorSize) {
    Eigen::Matrix<double, kDescriptorSize, 1> sums = decltype(sums)::Zero();
    Eigen::Matrix<int, kDescriptorSize, 1> counts = decltype(counts)::Zero();
    for (int j = 0; j < width; ++j) {
      const double value = signature(j);
      if (value <= 0.0) continue;
      const int sector = static_cast<int>(static_cast<long long>(j) * kDescriptorSize / width);
      sums(sector) += value;
      ++counts(sector);
    }
    for (int s = 0; s < kDescriptorSize; ++s) {
      if (counts(s) > 0) out(s) = sums(s) / counts(s);
    }
    return out;
  }

  for (int s = 0; s < kDescriptorSize; ++s) out(s) = signature(static_cast<long long>(s) * width / kDescriptorSize);
  return out;
}

Eigen::VectorXd dft_magnitudes(const DescriptorVector& signal, int bins) {
  Eigen::VectorXd mags(bins);
  const double step = 2.0 * std::numbers::pi / kDescriptorSize;
  for (int k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    for (int n = 0; n < kDescriptorSize; ++n) {
      // Index reduction keeps the twiddle angles exact multiples of 2*pi/64.
      const double angle = step * static_cast<double>((k * n) % kDescriptorSize);
      re += signal(n) * std::cos(angle);
      im -= signal(n) * std::sin(angle);
    }
    mags(k) = std::hypot(re, im);
  }
  return mags;
}

DescriptorPair SpectralExtractor::extract(const RangeImage& img) const {
  if (!img.has_returns()) throw DegenerateInput("extract: range image has no returns");

  DescriptorPair out;
  out.orientation.values = pool_to_sectors(column_signature(img));

  DescriptorVector q;
  q.head<kSpectrumBins>() = unit(dft_magnitudes(out.orientation.values, kSpectrumBins));
  q.tail<kHistogramBins>() = unit(range_histogram(img));
  out.place.values = q.normalized();
  return out;
}

DescriptorPair extract(const RangeImage& img) { return SpectralExtractor{}.extract(img); }

DescriptorVector circular_shift(const DescriptorVector& in, int shift) {
  DescriptorVector out;
  const int s = ((shift % kDescriptorSize) + kDescriptorSize) % kDescriptorSize;
  for (int j = 0; j < kDescriptorSize; ++j) out((j + s) % kDescriptorSize) = in(j);
  return out;
}

double yaw_discrepancy(const OrientationDescriptor& w1, const OrientationDescriptor& w2) {
  if (w1.values.isZero(0.0) || w2.values.isZero(0.0)) {
    throw DegenerateInput("yaw_discrepancy: all-zero orientation descriptor");
  }
  auto standardize = [](const DescriptorVector& v) -> DescriptorVector {
    const DescriptorVector centered = v.array() - v.mean();
    const double sd = std::sqrt(centered.squaredNorm() / kDescriptorSize);
    return sd > 0.0 ? DescriptorVector(centered / sd) : DescriptorVector::Zero();
  };
  const DescriptorVector a = standardize(w1.values);
  const DescriptorVector b = standardize(w2.values);

  // If cloud1 = Rz(yaw) * cloud2 then w2 = shift(w1, yaw * 64 / 2pi); score each candidate
  // shift by correlating w2 with w1 shifted by it.
  int best_shift = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  int best_abs = kDescriptorSize;
  for (int raw = 0; raw < kDescriptorSize; ++raw) {
    double score = 0.0;
    for (int j = 0; j < kDescriptorSize; ++j) score += b((j + raw) % kDescriptorSize) * a(j);
    score /= kDescriptorSize;
    // Signed shift in (-32, 32]; |shift| orders the tie-break.
    const int signed_shift = raw > kDescriptorSize / 2 ? raw - kDescriptorSize : raw;
    const int abs_shift = std::abs(signed_shift);
    if (score > best_score || (score == best_score && abs_shift < best_abs)) {
      best_score = score;
      best_shift = signed_shift;
      best_abs = abs_shift;
    }
  }
  return normalize_angle(2.0 * std::numbers::pi * best_shift / kDescriptorSize);
}

OrientationDescriptor rotate_orientation(const OrientationDescriptor& w, double yaw) {
  const int shift = static_cast<int>(std::lround(-yaw * kDescriptorSize / (2.0 * std::numbers::pi)));
  return OrientationDescriptor{circular_shift(w.values, shift)};
}

}  // namespace framekit
