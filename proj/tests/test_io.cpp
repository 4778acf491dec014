#include <doctest.h>

#include <fstream>

#include "framekit/io.hpp"
#include "support.hpp"

using namespace framekit;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

bool same_f32(double a, double b) { return static_cast<float>(a) == static_cast<float>(b); }

KeyframeLog random_log(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-100, 100), pos(0.0, 50.0), th(0.0, 10.0), yaw(-3.14, 3.14);
  KeyframeLog log;
  log.map = test::random_cloud(rng, 500, 80.0);
  for (std::size_t k = 0; k < n; ++k) {
    log.trajectory.push_back(Pose3{Point3(u(rng), u(rng), u(rng)), k % 3 == 0 ? std::optional<double>() : yaw(rng)});
    PlaceDescriptor q;
    OrientationDescriptor w;
    for (int j = 0; j < kDescriptorSize; ++j) {
      q.values(j) = pos(rng);
      w.values(j) = pos(rng);
    }
    q.values.normalize();
    log.place_stack.push_back(q);
    log.orient_stack.push_back(w);
    log.thresholds.push_back(th(rng));
  }
  return log;
}

}  // namespace

TEST_CASE("PLY round trip at float32 precision") {
  const fs::path dir = test::scratch_dir("ply");
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud c = test::random_cloud(rng, trial * 37, std::pow(10.0, trial % 6 - 1));
    c.frame = "agent" + std::to_string(trial);
    io::save_ply(dir / "c.ply", c);
    const PointCloud back = io::load_ply(dir / "c.ply");
    REQUIRE(back.size() == c.size());
    CHECK(back.frame == c.frame);
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (int a = 0; a < 3; ++a) REQUIRE(same_f32(back.points[i](a), c.points[i](a)));
    }
  }
}

TEST_CASE("PLY rejects NaN and malformed input with a location") {
  const fs::path dir = test::scratch_dir("ply_bad");
  const std::string header = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  write(dir / "nan.ply", header + "1 2 3\nnan 0 0\n");
  try {
    io::load_ply(dir / "nan.ply");
    FAIL("NaN accepted");
  } catch (const ParseError& e) {
    CHECK(e.unit() == ParseError::Unit::Line);
    CHECK(e.location() == 9);
  }
  write(dir / "short.ply", header + "1 2 3\n");
  CHECK_THROWS_AS(io::load_ply(dir / "short.ply"), ParseError);
  write(dir / "junk.ply", "hello\n");
  CHECK_THROWS_AS(io::load_ply(dir / "junk.ply"), ParseError);
  CHECK_THROWS(io::load_ply(dir / "missing.ply"));
}

TEST_CASE("binary little-endian PLY with an extra property") {
  const fs::path dir = test::scratch_dir("ply_bin");
  std::string data =
      "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
      "property float z\nproperty uchar intensity\nend_header\n";
  const float v[2][3] = {{1.5f, -2.0f, 3.25f}, {0.0f, 7.0f, -1.0f}};
  for (const auto& p : v) {
    data.append(reinterpret_cast<const char*>(p), sizeof(p));
    data.push_back('\x7f');
  }
  write(dir / "b.ply", data);
  const PointCloud c = io::load_ply(dir / "b.ply");
  REQUIRE(c.size() == 2);
  CHECK(c.points[0] == Point3(1.5, -2.0, 3.25));
  CHECK(c.points[1] == Point3(0.0, 7.0, -1.0));
  write(dir / "trunc.ply", data.substr(0, data.size() - 3));
  try {
    io::load_ply(dir / "trunc.ply");
    FAIL("truncated file accepted");
  } catch (const ParseError& e) {
    CHECK(e.unit() == ParseError::Unit::Byte);
  }
}

TEST_CASE("trajectory CSV round trip, header-only and errors") {
  const fs::path dir = test::scratch_dir("csv");
  std::mt19937_64 rng(82);
  const KeyframeLog log = random_log(rng, 40);
  io::save_traj_csv(dir / "t.csv", log.trajectory, log.thresholds);
  const io::TrajectoryTable t = io::load_traj_csv(dir / "t.csv");
  REQUIRE(t.trajectory.size() == 40);
  for (std::size_t k = 0; k < 40; ++k) {
    for (int a = 0; a < 3; ++a) REQUIRE(same_f32(t.trajectory[k].position(a), log.trajectory[k].position(a)));
    REQUIRE(t.trajectory[k].yaw.has_value() == log.trajectory[k].yaw.has_value());
    if (log.trajectory[k].yaw) REQUIRE(same_f32(*t.trajectory[k].yaw, *log.trajectory[k].yaw));
    REQUIRE(same_f32(t.thresholds[k], log.thresholds[k]));
  }
  write(dir / "empty.csv", "k,x,y,z,yaw,th\n");
  CHECK(io::load_traj_csv(dir / "empty.csv").trajectory.empty());
  write(dir / "nan.csv", "k,x,y,z,yaw,th\n0,1,2,3,0,1\n1,nan,0,0,0,1\n");
  try {
    io::load_traj_csv(dir / "nan.csv");
    FAIL("NaN accepted");
  } catch (const ParseError& e) {
    CHECK(e.location() == 3);
  }
  write(dir / "order.csv", "k,x,y,z,yaw,th\n1,1,2,3,0,1\n");
  CHECK_THROWS_AS(io::load_traj_csv(dir / "order.csv"), ParseError);
  write(dir / "header.csv", "a,b\n");
  CHECK_THROWS_AS(io::load_traj_csv(dir / "header.csv"), ParseError);
}

TEST_CASE("FRMD descriptor round trip and validation") {
  const fs::path dir = test::scratch_dir("frmd");
  std::mt19937_64 rng(83);
  for (std::size_t n : {0u, 1u, 17u, 200u}) {
    const KeyframeLog log = random_log(rng, n);
    io::save_desc(dir / "d.bin", log.place_stack, log.orient_stack);
    const auto [q, w] = io::load_desc(dir / "d.bin");
    REQUIRE(q.size() == n);
    REQUIRE(w.size() == n);
    for (std::size_t k = 0; k < n; ++k) {
      for (int j = 0; j < kDescriptorSize; ++j) {
        REQUIRE(same_f32(q[k].values(j), log.place_stack[k].values(j)));
        REQUIRE(same_f32(w[k].values(j), log.orient_stack[k].values(j)));
      }
    }
    CHECK(fs::file_size(dir / "d.bin") == 10 + n * 128 * 4);
  }
  const KeyframeLog log = random_log(rng, 2);
  io::save_desc(dir / "d.bin", log.place_stack, log.orient_stack);
  std::string bytes = io::read_text(dir / "d.bin");
  std::string bad = bytes;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bad.data() + 10 + 4 * 5, &nan, 4);
  write(dir / "nan.bin", bad);
  try {
    io::load_desc(dir / "nan.bin");
    FAIL("NaN accepted");
  } catch (const ParseError& e) {
    CHECK(e.unit() == ParseError::Unit::Byte);
    CHECK(e.location() == 30);
  }
  write(dir / "magic.bin", "XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(io::load_desc(dir / "magic.bin"), ParseError);
  write(dir / "trunc.bin", bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(io::load_desc(dir / "trunc.bin"), ParseError);
  std::vector<PlaceDescriptor> one(1);
  CHECK_THROWS(io::save_desc(dir / "x.bin", one, {}));
}

TEST_CASE("transform JSON round trip") {
  const fs::path dir = test::scratch_dir("json");
  std::mt19937_64 rng(84);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransformd t = test::random_transform(rng, 100.0);
    io::save_transform_json(dir / "t.json", t);
    CHECK(test::transform_gap(io::load_transform_json(dir / "t.json"), t) < 1e-12);
  }
  write(dir / "bad.json", "{\"world_from_map\": {\"rotation\": [[1,0,0],[0,1,0]], \"translation\": [0,0,0]}}");
  CHECK_THROWS(io::load_transform_json(dir / "bad.json"));
  write(dir / "scaled.json", "{\"world_from_map\": {\"rotation\": [[2,0,0],[0,1,0],[0,0,1]], \"translation\": [0,0,0]}}");
  CHECK_THROWS(io::load_transform_json(dir / "scaled.json"));
}

TEST_CASE("whole-log round trip and prefix resolution") {
  const fs::path dir = test::scratch_dir("log");
  std::mt19937_64 rng(85);
  const KeyframeLog log = random_log(rng, 12);
  const RigidTransformd gt = test::random_transform(rng);
  io::save_log(dir, "agent", log, gt);
  for (const char* f : {"agent.map.ply", "agent.traj.csv", "agent.desc.bin", "agent.gt.json"}) CHECK(fs::exists(dir / f));
  CHECK(io::log_prefix(dir / "agent.desc.bin") == dir / "agent");
  const KeyframeLog back = io::load_log(dir / "agent.map.ply");
  CHECK(back.size() == log.size());
  CHECK(back.map.size() == log.map.size());
  CHECK(back.consistent());
  CHECK(test::transform_gap(*io::load_log_ground_truth(dir / "agent"), gt) < 1e-12);
  fs::remove(dir / "agent.gt.json");
  CHECK_FALSE(io::load_log_ground_truth(dir / "agent"));
  // Stacks of different lengths are rejected.
  io::save_traj_csv(dir / "agent.traj.csv", {log.trajectory[0]}, {1.0});
  CHECK_THROWS(io::load_log(dir / "agent"));
}
