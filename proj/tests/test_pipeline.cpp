#include <doctest.h>

#include <chrono>

#include "framekit/kdtree.hpp"
#include "framekit/pipeline.hpp"
#include "framekit/scenarios.hpp"
#include "support.hpp"

using namespace framekit;

namespace {

OrientationDescriptor ramp() {
  OrientationDescriptor w;
  for (int j = 0; j < kDescriptorSize; ++j) w.values(j) = 1.0 + 0.3 * j + std::sin(0.4 * j);
  return w;
}

// Shared T-junction run; simulated once.
const ScenarioRun& tee_run() {
  static const ScenarioRun run = run_scenario(t_junction_scenario());
  return run;
}

}  // namespace

TEST_CASE("evaluate metric identities") {
  const TransformError zero = evaluate(yaw_rotation(0.4), yaw_rotation(0.4));
  CHECK(zero.translation == 0.0);
  CHECK(zero.rotation_frob == doctest::Approx(0.0));
  CHECK(zero.rotation_deg == doctest::Approx(0.0));
  const TransformError flip = evaluate(RigidTransformd::Identity(), yaw_rotation(test::kPi));
  CHECK(std::abs(flip.rotation_frob - 2.0 * std::sqrt(2.0)) < 1e-9);
  CHECK(flip.rotation_deg == doctest::Approx(180.0));
  const TransformError t = evaluate(RigidTransformd::Translation(Point3(0.3, 0.4, 0)), RigidTransformd::Identity());
  CHECK(t.translation == doctest::Approx(0.5));
  CHECK(evaluate(yaw_rotation(test::deg(10)), RigidTransformd::Identity()).rotation_deg == doctest::Approx(10.0));
}

TEST_CASE("initial_transform examples") {
  const OrientationDescriptor w = ramp();
  const Pose3 p{Point3(3, 4, 5), 0.0};
  CHECK(test::transform_gap(initial_transform(p, p, w, w), RigidTransformd::Identity()) < 1e-12);
  const RigidTransformd t = initial_transform(Pose3{Point3(10, 0, 0), 0.0}, Pose3{Point3::Zero(), 0.0}, w, w);
  CHECK(test::transform_gap(t, RigidTransformd::Translation(Point3(10, 0, 0))) < 1e-12);
  // A quarter turn: the offset of p2 is rotated before it is subtracted.
  const RigidTransformd q = initial_transform(Pose3{Point3(1, 1, 0), 0.0}, Pose3{Point3(2, 0, 0), 0.0},
                                              rotate_orientation(w, test::kPi / 2), w);
  CHECK(q.yaw() == doctest::Approx(test::kPi / 2));
  CHECK((q * Point3(2, 0, 0) - Point3(1, 1, 0)).norm() < 1e-12);
}

TEST_CASE("adaptive radius tiers") {
  CHECK(radius_for_spacing(10.0) == 25.0);
  CHECK(radius_for_spacing(12.0) == 25.0);
  CHECK(radius_for_spacing(6.0) == 15.0);
  CHECK(radius_for_spacing(9.99) == 15.0);
  CHECK(radius_for_spacing(3.0) == 10.0);
  CHECK(radius_for_spacing(5.0) == 10.0);
  CHECK(radius_for_spacing(2.0) == 4.0);
  CHECK(radius_for_spacing(0.5) == 1.0);
  const Trajectory t = {Pose3{Point3(0, 0, 0), 0.0}, Pose3{Point3(10, 0, 0), 0.0}, Pose3{Point3(12, 0, 0), 0.0}};
  CHECK(adaptive_radius(t, 0) == 25.0);
  CHECK(adaptive_radius(t, 1) == 25.0);
  CHECK(adaptive_radius(t, 2) == 4.0);
  CHECK_THROWS_AS(adaptive_radius(Trajectory{t[0]}, 0), std::invalid_argument);
  CHECK_THROWS_AS(adaptive_radius(t, 3), std::out_of_range);
}

TEST_CASE("sample_sphere boundary, empty and brute-force cases") {
  PointCloud c;
  c.points = {Point3(1, 0, 0), Point3(0, 2, 0), Point3(3, 0, 0)};
  CHECK(sample_sphere(c, Point3::Zero(), 2.0).size() == 2);
  CHECK(sample_sphere(c, Point3(10, 10, 10), 1.0).empty());
  CHECK_THROWS_AS(sample_sphere(c, Point3::Zero(), 0.0), std::invalid_argument);
  PointCloud grid;
  for (int x = -10; x <= 10; ++x) {
    for (int y = -10; y <= 10; ++y) {
      for (int z = -3; z <= 3; ++z) grid.points.emplace_back(0.5 * x, 0.5 * y, 0.5 * z);
    }
  }
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-3, 3), r(0.2, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Point3 center(u(rng), u(rng), u(rng));
    const double radius = r(rng);
    const auto count = std::count_if(grid.points.begin(), grid.points.end(),
                                     [&](const Point3& p) { return (p - center).norm() <= radius; });
    REQUIRE(static_cast<long>(sample_sphere(grid, center, radius).size()) == count);
  }
}

TEST_CASE("transform_log moves every component") {
  const KeyframeLog& log = tee_run().logs[0];
  const RigidTransformd t(yaw_matrix(test::deg(90)), Point3(1, 2, 3));
  const KeyframeLog moved = transform_log(log, t);
  REQUIRE(moved.size() == log.size());
  CHECK((moved.map.points[5] - t * log.map.points[5]).norm() < 1e-9);
  CHECK((moved.trajectory[2].position - t * log.trajectory[2].position).norm() < 1e-9);
  CHECK(normalize_angle(*moved.trajectory[2].yaw - *log.trajectory[2].yaw - test::deg(90)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(moved.place_stack[2].values == log.place_stack[2].values);
  CHECK(yaw_discrepancy(moved.orient_stack[2], log.orient_stack[2]) == doctest::Approx(test::deg(90)).epsilon(0.05));
}

TEST_CASE("self-merge yields identity and a full-size union") {
  const KeyframeLog& log = tee_run().logs[0];
  const MergeReport r = merge_pair(log, log, {}, RigidTransformd::Identity());
  CHECK(r.converged);
  REQUIRE(r.errors);
  CHECK(r.errors->translation <= 1e-3);
  CHECK(r.errors->rotation_deg <= 0.1);
  CHECK(r.merged_map.size() == 2 * log.map.size());
}

TEST_CASE("yaw-only self-merge on noiseless data") {
  Scenario s = t_junction_scenario();
  s.noise_sigma = 0.0;
  s.missions.resize(1);
  const ScenarioRun run = run_scenario(s);
  for (double deg : {35.0, -120.0, 180.0}) {
    const RigidTransformd gt = yaw_rotation(test::deg(deg));
    // log2 lives in a frame whose pose in frame 1 is gt.
    const KeyframeLog log2 = transform_log(run.logs[0], inverse(gt));
    const MergeReport r = merge_pair(run.logs[0], log2, {}, gt);
    CHECK(r.errors->translation < 0.05);
    CHECK(r.errors->rotation_deg < 0.5);
  }
}

TEST_CASE("T-junction merge recovers ground truth; timings add up") {
  const ScenarioRun& run = tee_run();
  const auto t0 = std::chrono::steady_clock::now();
  const MergeReport r = merge_pair(run.logs[0], run.logs[1], {}, run.ground_truth(1));
  const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  CHECK(r.converged);
  CHECK(r.errors->translation <= 0.2);
  CHECK(r.errors->rotation_deg <= 2.0);
  CHECK(r.merged_map.size() == run.logs[0].map.size() + run.logs[1].map.size());
  CHECK(r.radius1 > 0.0);
  CHECK(r.sample1_size > 0);
  const StageTimings& t = r.timings;
  const double sum = t.query_ms + t.sample_ms + t.gicp_ms + t.union_ms;
  CHECK(std::abs(sum - t.total_ms) <= 0.1 * t.total_ms);
  CHECK(t.total_ms <= wall * 1.1 + 1.0);
  // Union: M1 first, then the transformed M2.
  const Point3 last = r.transform * run.logs[1].map.points.back();
  CHECK((r.merged_map.points.back() - last).norm() < 1e-9);
}

TEST_CASE("T_0 for a reversed traversal is within one sector of 180 degrees") {
  const ScenarioRun run = run_scenario(straight_opposite_scenario());
  const MergeReport r = merge_pair(run.logs[0], run.logs[1], {}, run.ground_truth(1));
  const TransformError e0 = evaluate(r.initial, run.ground_truth(1));
  CHECK(e0.rotation_deg <= 6.0);
  CHECK(r.errors->translation <= 0.2);
}

TEST_CASE("logs with no shared structure are not silently merged") {
  // Two separate networks; each agent only ever sees its own.
  Scenario a = t_junction_scenario();
  a.missions.resize(1);
  const ScenarioRun run_a = run_scenario(a);
  Scenario b = narrow_scenario();
  b.missions.resize(1);
  const ScenarioRun run_b = run_scenario(b);
  bool flagged = false;
  try {
    const MergeReport r = merge_pair(run_a.logs[0], run_b.logs[0]);
    flagged = !r.converged;
  } catch (const MergeFailure& f) {
    flagged = true;
    CHECK(f.step() == 0);
  }
  CHECK(flagged);
}

TEST_CASE("invalid inputs") {
  const KeyframeLog& log = tee_run().logs[0];
  CHECK_THROWS_AS(merge_pair(KeyframeLog{}, log), std::invalid_argument);
  KeyframeLog broken = log;
  broken.place_stack.pop_back();
  CHECK_THROWS_AS(merge_pair(log, broken), std::invalid_argument);
  CHECK_THROWS_AS(merge_sequence({log}), std::invalid_argument);
}

TEST_CASE("merge_sequence of two logs matches merge_pair") {
  const ScenarioRun& run = tee_run();
  const MergeReport pair = merge_pair(run.logs[0], run.logs[1]);
  std::size_t calls = 0;
  const SequenceReport seq = merge_sequence(run.logs, {}, run.world_from_map,
                                            [&](std::size_t step, const MergeReport&) { calls += step; });
  CHECK(calls == 1);
  REQUIRE(seq.transforms.size() == 1);
  CHECK(test::transform_gap(seq.transforms[0], pair.transform) < 1e-9);
  CHECK(seq.global_map.size() == pair.merged_map.size());
  REQUIRE(seq.steps[0].errors);
  CHECK(seq.steps[0].errors->translation <= 0.2);
}

TEST_CASE("failure_envelope basics") {
  const SyntheticWorld world = build_world(
      add_alcoves({{Point3(0, 0, 0), Point3(60, 0, 0), 5, 4}, {Point3(30, 0, 0), Point3(30, 30, 0), 5, 4}}, 8.0, 4),
      0.02, 3);
  EnvelopeOptions opts;
  opts.trials = 3;
  const auto grid = failure_envelope(world, {0.0, 2.0}, {0.0}, {15.0}, opts);
  REQUIRE(grid.size() == 2);
  CHECK(grid[0].success_rate == 1.0);
  CHECK(grid[0].mean_error < 0.3);
  CHECK(grid[1].offset == 2.0);
  CHECK(grid[0].mean_ms > 0.0);
  CHECK_THROWS_AS(failure_envelope(world, {}, {0.0}, {15.0}), std::invalid_argument);
}
