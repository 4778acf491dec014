#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

#include "framekit/commands.hpp"
#include "framekit/io.hpp"
#include "framekit/kdtree.hpp"
#include "framekit/scenarios.hpp"
#include "support.hpp"

using namespace framekit;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + FRAMEKIT_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

bool close_f32(double a, double b) { return std::abs(a - b) <= 2e-7 * std::max(1.0, std::abs(b)); }

// Synthesizes a scenario into dir via the CLI; returns the mission names in order.
std::vector<std::string> synth(const std::string& scenario, const fs::path& dir) {
  REQUIRE(run("scenario " + scenario + " -o " + q(dir), dir / "scenario.log") == 0);
  std::vector<std::string> names;
  std::string missions;
  for (const auto& m : [&] {
         for (const auto& s : acceptance_scenarios()) {
           if (s.name == scenario) return s.missions;
         }
         return std::vector<MissionSpec>{};
       }()) {
    names.push_back(m.name);
    missions += " " + q(dir / (m.name + ".mission"));
  }
  REQUIRE(run("synth " + q(dir / "world.txt") + missions + " -o " + q(dir / "logs"), dir / "synth.log") == 0);
  return names;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  const fs::path dir = test::scratch_dir("cli_usage");
  CHECK(run("", dir / "o.log") == cli::kExitUsage);
  CHECK(run("bogus", dir / "o.log") == cli::kExitUsage);
  CHECK(run("merge", dir / "o.log") == cli::kExitUsage);
  CHECK(run("--help", dir / "o.log") == 0);
  CHECK(run("scenario nowhere -o " + q(dir), dir / "o.log") == cli::kExitUsage);
}

TEST_CASE("malformed world spec exits 2 naming the line") {
  const fs::path dir = test::scratch_dir("cli_badworld");
  write(dir / "world.txt", "0 0 0 10 0 0 4 3\n10 0 0 10 10\n");
  MissionSpec m{"a", {Point3(1, 0, 0), Point3(9, 0, 0)}, {}};
  write(dir / "a.mission", cli::format_mission(m));
  CHECK(run("synth " + q(dir / "world.txt") + " " + q(dir / "a.mission") + " -o " + q(dir / "out"), dir / "o.log") ==
        cli::kExitUsage);
  const auto out = lines_of(dir / "o.log");
  REQUIRE(!out.empty());
  CHECK(out.front().find("line 2") != std::string::npos);
}

TEST_CASE("synth writes four files per mission that reload like the in-memory logs") {
  const fs::path dir = test::scratch_dir("cli_synth");
  const auto names = synth("narrow", dir);
  REQUIRE(names.size() == 2);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "logs")) files += e.is_regular_file();
  CHECK(files == 8);

  const ScenarioRun run_mem = run_scenario(narrow_scenario());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const KeyframeLog disk = io::load_log(dir / "logs" / names[i]);
    const KeyframeLog& mem = run_mem.logs[i];
    REQUIRE(disk.size() == mem.size());
    REQUIRE(disk.map.size() == mem.map.size());
    for (std::size_t p = 0; p < mem.map.size(); p += 97) {
      for (int a = 0; a < 3; ++a) REQUIRE(close_f32(disk.map.points[p](a), mem.map.points[p](a)));
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
      REQUIRE((disk.trajectory[k].position - mem.trajectory[k].position).norm() < 1e-4);
      for (int j = 0; j < kDescriptorSize; ++j) {
        REQUIRE(close_f32(disk.place_stack[k].values(j), mem.place_stack[k].values(j)));
        REQUIRE(close_f32(disk.orient_stack[k].values(j), mem.orient_stack[k].values(j)));
      }
    }
    const auto gt = io::load_log_ground_truth(dir / "logs" / names[i]);
    REQUIRE(gt);
    CHECK(test::transform_gap(*gt, run_mem.world_from_map[i]) < 1e-9);
  }

  // Merging the two logs succeeds with one converged row.
  const fs::path merged = dir / "merged";
  CHECK(run("merge " + q(dir / "logs" / names[0]) + " " + q(dir / "logs" / (names[1] + ".map.ply")) + " -o " + q(merged),
            dir / "merge.log") == 0);
  const auto report = lines_of(merged / "report.csv");
  REQUIRE(report.size() == 2);
  CHECK(report[0] == cli::kReportHeader);
  std::stringstream row(report[1]);
  std::vector<std::string> cells;
  for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
  REQUIRE(cells.size() == 13);
  CHECK(cells[8] == "true");
  CHECK(std::stod(cells[5]) <= 0.2);
  CHECK(fs::exists(merged / "merged.ply"));
  CHECK(fs::exists(merged / "transforms.json"));
  const PointCloud m = io::load_ply(merged / "merged.ply");
  CHECK(m.size() == run_mem.logs[0].map.size() + run_mem.logs[1].map.size());
}

TEST_CASE("disjoint logs exit 1 and keep a partial report") {
  const fs::path dir = test::scratch_dir("cli_disjoint");
  Scenario a = t_junction_scenario();
  a.missions.resize(1);
  Scenario b = narrow_scenario();
  b.missions.resize(1);
  io::save_log(dir, "a", run_scenario(a).logs[0]);
  io::save_log(dir, "b", run_scenario(b).logs[0]);
  CHECK(run("merge " + q(dir / "a") + " " + q(dir / "b") + " -o " + q(dir / "out"), dir / "o.log") ==
        cli::kExitMergeFailure);
  CHECK(fs::exists(dir / "out" / "report.csv"));
  const auto out = lines_of(dir / "o.log");
  REQUIRE(!out.empty());
  CHECK(out.back().find("step 1") != std::string::npos);
}

TEST_CASE("config errors and missing logs exit 2") {
  const fs::path dir = test::scratch_dir("cli_config");
  write(dir / "bad.cfg", "gicp.k_neighbors = 20\ngicp.nonsense = 1\n");
  CHECK_THROWS_AS(cli::parse_config(io::read_text(dir / "bad.cfg")), ParseError);
  CHECK(run("merge " + q(dir / "x") + " " + q(dir / "y") + " -c " + q(dir / "bad.cfg") + " -o " + q(dir / "o"),
            dir / "o.log") == cli::kExitUsage);
  CHECK(run("merge " + q(dir / "x") + " " + q(dir / "y") + " -o " + q(dir / "o"), dir / "o.log") == cli::kExitUsage);
  const cli::Config c = cli::parse_config("projection.width = 128\ngicp.voxel_leaf = 0.25\nunion.downsample = true\n");
  CHECK(c.projection.width == 128);
  CHECK(c.merge.gicp.voxel_leaf == 0.25);
  CHECK(c.merge.downsample_union);
  CHECK_THROWS_AS(cli::parse_config("gicp.k_neighbors = 2\n"), ParseError);
  CHECK_THROWS_AS(cli::parse_config("gicp.k_neighbors = 20\ngicp.k_neighbors = 21\n"), ParseError);
}

TEST_CASE("mission files round trip") {
  const MissionSpec m{"scout", {Point3(1, 2, 3), Point3(4.5, -6, 0)}, RigidTransformd(yaw_matrix(1.0), Point3(7, 8, 9))};
  const MissionSpec back = cli::parse_mission(cli::format_mission(m));
  CHECK(back.name == "scout");
  REQUIRE(back.waypoints.size() == 2);
  CHECK(back.waypoints[1] == m.waypoints[1]);
  CHECK(test::transform_gap(back.world_from_map, m.world_from_map) < 1e-12);
  CHECK_THROWS_AS(cli::parse_mission("waypoint = 1 2 3\n"), ParseError);
}

TEST_CASE("envelope: single zero-offset cell and malformed sweep") {
  const fs::path dir = test::scratch_dir("cli_envelope");
  write(dir / "world.txt", "0 0 0 40 0 0 5 4\n20 0 0 20 25 0 5 4\n");
  write(dir / "sweep.cfg", "offsets = 0\nyaws_deg = 0\nradii = 15\ntrials = 2\n");
  CHECK(run("envelope " + q(dir / "world.txt") + " " + q(dir / "sweep.cfg") + " -o " + q(dir / "env.csv"), dir / "o.log") == 0);
  const auto rows = lines_of(dir / "env.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "offset,yaw,radius,success_rate,mean_Te,mean_ms");
  CHECK(rows[1].rfind("0,0,15,1,", 0) == 0);
  write(dir / "bad.cfg", "offsets = 0, x\nyaws_deg = 0\nradii = 15\n");
  CHECK(run("envelope " + q(dir / "world.txt") + " " + q(dir / "bad.cfg") + " -o " + q(dir / "e2.csv"), dir / "o.log") ==
        cli::kExitUsage);
  write(dir / "missing.cfg", "offsets = 0\nyaws_deg = 0\n");
  CHECK(run("envelope " + q(dir / "world.txt") + " " + q(dir / "missing.cfg") + " -o " + q(dir / "e3.csv"), dir / "o.log") ==
        cli::kExitUsage);
}

TEST_CASE("four-map scenario through the CLI: three rows, transforms match ground truth") {
  const fs::path dir = test::scratch_dir("cli_four");
  const auto names = synth("four_map", dir);
  REQUIRE(names.size() == 4);
  std::string logs;
  for (const auto& n : names) logs += " " + q(dir / "logs" / n);
  REQUIRE(run("merge" + logs + " -o " + q(dir / "merged"), dir / "merge.log") == 0);
  CHECK(lines_of(dir / "merged" / "report.csv").size() == 4);

  const auto j = nlohmann::json::parse(io::read_text(dir / "merged" / "transforms.json"));
  const auto& ts = j.at("transforms");
  REQUIRE(ts.size() == 3);
  const RigidTransformd g0 = *io::load_log_ground_truth(dir / "logs" / names[0]);
  for (std::size_t n = 1; n < 4; ++n) {
    Eigen::Matrix3d r;
    Point3 t;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) r(a, b) = ts[n - 1].at("rotation")[a][b].get<double>();
      t(a) = ts[n - 1].at("translation")[a].get<double>();
    }
    const RigidTransformd gt = compose(inverse(g0), *io::load_log_ground_truth(dir / "logs" / names[n]));
    const TransformError e = evaluate(RigidTransformd::Orthonormalized(r, t), gt);
    CHECK(e.translation <= 0.25);
    CHECK(e.rotation_deg <= 2.0);
  }
}
