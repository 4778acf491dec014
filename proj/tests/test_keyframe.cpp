#include <doctest.h>

#include "framekit/keyframe.hpp"
#include "support.hpp"

using namespace framekit;

namespace {

PointCloud ring(double range, int n = 36) {
  PointCloud c;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * test::kPi * i / n;
    c.points.emplace_back(range * std::cos(a), range * std::sin(a), 0.0);
  }
  return c;
}

DescriptorPair dummy_descriptor() {
  DescriptorPair d;
  d.place.values(0) = 1.0;
  d.orientation.values.setConstant(1.0);
  return d;
}

}  // namespace

TEST_CASE("mean_range") {
  CHECK(mean_range(ring(10.0)) == doctest::Approx(10.0));
  PointCloud c;
  c.points = {Point3(3, 4, 0), Point3(0, 0, 1)};
  CHECK(mean_range(c) == doctest::Approx(3.0));
  CHECK_THROWS_AS(mean_range(PointCloud{}), std::invalid_argument);
}

TEST_CASE("update_spaciousness examples") {
  auto [s1, st1] = update_spaciousness(SpaciousnessState::from(0.0), ring(10.0));
  CHECK(s1 == doctest::Approx(1.0));
  CHECK(st1.s_prev == doctest::Approx(1.0));
  auto [s2, st2] = update_spaciousness(SpaciousnessState::from(5.0), ring(5.0));
  CHECK(s2 == doctest::Approx(5.0));
  CHECK_THROWS_AS(update_spaciousness(SpaciousnessState{}, PointCloud{}), std::invalid_argument);
}

TEST_CASE("unprimed state seeds with the first scan") {
  auto [s, st] = update_spaciousness(SpaciousnessState{}, ring(7.0));
  CHECK(s == doctest::Approx(7.0));
  CHECK(st.primed);
}

TEST_CASE("spaciousness recursion matches the geometric series") {
  SpaciousnessState st = SpaciousnessState::from(0.0);
  const PointCloud scan = ring(8.0);
  double s = 0.0;
  for (int n = 1; n <= 200; ++n) {
    std::tie(s, st) = update_spaciousness(st, scan);
    REQUIRE(std::abs(s - 8.0 * (1.0 - std::pow(0.9, n))) < 1e-9);
    if (n == 66) CHECK(std::abs(s - 8.0) < 1e-2);
  }
  // From an arbitrary start with varying scans: s_n = 0.9^n s_0 + sum 0.1 * 0.9^(n-k) S_k.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> r(0.5, 30.0);
  st = SpaciousnessState::from(4.0);
  double oracle = 4.0;
  for (int n = 1; n <= 100; ++n) {
    const double sk = r(rng);
    std::tie(s, st) = update_spaciousness(st, ring(sk));
    oracle = 0.9 * oracle + 0.1 * mean_range(ring(sk));
    REQUIRE(std::abs(s - oracle) < 1e-9);
  }
}

TEST_CASE("sampling_threshold piecewise table") {
  CHECK(sampling_threshold(12.0) == 10.0);
  CHECK(sampling_threshold(7.0) == 6.0);
  CHECK(sampling_threshold(2.0) == 2.0);
  CHECK(sampling_threshold(4.5) == 3.0);
  // boundaries belong to the lower tier
  CHECK(sampling_threshold(10.0) == 6.0);
  CHECK(sampling_threshold(6.0) == 3.0);
  CHECK(sampling_threshold(3.0) == 3.0);
  CHECK(sampling_threshold(0.0) == 0.0);
  CHECK_THROWS_AS(sampling_threshold(-1.0), std::invalid_argument);
  double prev = 0.0;
  for (double s = 0.0; s <= 20.0; s += 0.01) {
    const double th = sampling_threshold(s);
    REQUIRE(th >= prev);
    prev = th;
  }
}

TEST_CASE("should_sample examples") {
  KeyframeLog log;
  CHECK(should_sample(log, Pose3{Point3(5, 5, 5), 0.0}, 3.0));
  const auto d = dummy_descriptor();
  log = append_keyframe(log, Pose3{Point3::Zero(), 0.0}, d.place, d.orientation, ring(1.0), 3.0);
  CHECK_FALSE(should_sample(log, Pose3{Point3(1, 0, 0), 0.0}, 3.0));
  CHECK(should_sample(log, Pose3{Point3(1, 0, 0), test::deg(45)}, 3.0));
  CHECK_FALSE(should_sample(log, Pose3{Point3(1, 0, 0), test::deg(25)}, 3.0));
  CHECK(should_sample(log, Pose3{Point3(3, 0, 0), 0.0}, 3.0));
  CHECK(should_sample(log, Pose3{Point3(1, 0, 0), test::deg(-179)}, 3.0, test::deg(30)));
  // A yaw-less pose is judged on distance alone.
  CHECK_FALSE(should_sample(log, Pose3{Point3(1, 0, 0), std::nullopt}, 3.0));
}

TEST_CASE("append_keyframe keeps stacks in sync and concatenates maps") {
  KeyframeLog log;
  const auto d = dummy_descriptor();
  std::size_t total = 0;
  for (int n = 1; n <= 10; ++n) {
    const PointCloud scan = ring(2.0, n * 3);
    total += scan.size();
    log = append_keyframe(log, Pose3{Point3(n, 0, 0), 0.0}, d.place, d.orientation, scan, 3.0);
    REQUIRE(log.size() == static_cast<std::size_t>(n));
    REQUIRE(log.consistent());
    REQUIRE(log.map.size() == total);
  }
  log.thresholds.pop_back();
  CHECK_THROWS_AS(append_keyframe(log, Pose3{}, d.place, d.orientation, ring(1.0), 3.0), std::logic_error);
}

TEST_CASE("nearest_keyframe") {
  KeyframeLog log;
  CHECK_FALSE(nearest_keyframe(log, Point3::Zero()));
  const auto d = dummy_descriptor();
  for (int i = 0; i < 5; ++i) log = append_keyframe(log, Pose3{Point3(10.0 * i, 0, 0), 0.0}, d.place, d.orientation, ring(1), 1);
  CHECK(*nearest_keyframe(log, Point3(21, 3, 0)) == 2);
}

TEST_CASE("random walks: keyframes at least the smallest threshold apart unless rotation fired") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> step(-0.6, 0.6), turn(-0.3, 0.3), th(1.0, 6.0);
  const auto d = dummy_descriptor();
  for (int walk = 0; walk < 20; ++walk) {
    KeyframeLog log;
    std::vector<bool> by_rotation;
    Point3 p = Point3::Zero();
    double yaw = 0.0, min_th = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 400; ++i) {
      p += Point3(step(rng), step(rng), 0.0);
      yaw = normalize_angle(yaw + turn(rng));
      const double t = th(rng);
      const Pose3 pose{p, yaw};
      if (!should_sample(log, pose, t)) continue;
      const auto nearest = nearest_keyframe(log, p);
      by_rotation.push_back(nearest && (log.trajectory[*nearest].position - p).norm() < t - 1e-9);
      min_th = std::min(min_th, t);
      log = append_keyframe(log, pose, d.place, d.orientation, ring(1.0), t);
    }
    for (std::size_t i = 0; i < log.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (by_rotation[i]) continue;
        REQUIRE((log.trajectory[i].position - log.trajectory[j].position).norm() >= min_th - 1e-9);
      }
    }
  }
}
