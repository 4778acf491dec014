#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "framekit/pipeline.hpp"
#include "framekit/rangeproj.hpp"
#include "framekit/scenarios.hpp"

namespace framekit::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitMergeFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entries of a flat `key = value` file with `#` comments, in file order.
struct KeyValues {
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<std::size_t> lines;
};

/// Throws ParseError on a line without '='.
KeyValues parse_key_values(const std::string& text, const std::string& source);

struct Config {
  ProjectionModel projection;
  GicpConfig gicp;
  double rot_threshold = kDefaultRotationThreshold;
  MergeOptions merge;
  std::string merged_name = "merged.ply";
  std::string report_name = "report.csv";
  std::string transforms_name = "transforms.json";
};

/// Keys: projection.{width,height,fov_up_deg,fov_down_deg,max_range},
/// gicp.{k_neighbors,max_correspondence_distance,max_iterations,translation_epsilon,
/// rotation_epsilon,plane_regularization,voxel_leaf}, keyframe.rot_threshold_deg,
/// merge.{min_inlier_fraction,tight_correspondence,tight_pose_distance,tight_max_correspondence},
/// union.{downsample,leaf}, output.{merged,report,transforms}.
/// Unknown keys and out-of-range values raise ParseError with the line number.
Config parse_config(const std::string& text, const std::string& source = "config");

struct Sweep {
  std::vector<double> offsets;
  std::vector<double> yaws_deg;
  std::vector<double> radii;
  EnvelopeOptions options;
};

/// Keys: offsets, yaws_deg, radii (comma or space separated lists, required), trials, seed,
/// success_threshold, min_segment_length and the gicp.* keys of parse_config.
Sweep parse_sweep(const std::string& text, const std::string& source = "sweep");

/// Keys: name (required), waypoint = x y z (repeated, at least one), frame_yaw_deg,
/// frame_translation = x y z.
MissionSpec parse_mission(const std::string& text, const std::string& source = "mission");
std::string format_mission(const MissionSpec& mission);

struct SynthArgs {
  fs::path world;
  std::vector<fs::path> missions;
  fs::path out_dir;
  std::optional<fs::path> config;
  double noise = 0.02;
  std::uint64_t seed = 7;
};

struct MergeArgs {
  std::vector<fs::path> logs;
  std::optional<fs::path> config;
  fs::path out_dir;
  /// Overrides union.downsample from the config when set.
  std::optional<bool> downsample;
};

struct EnvelopeArgs {
  fs::path world;
  fs::path sweep;
  fs::path out_csv;
  double noise = 0.02;
  std::uint64_t seed = 7;
};

struct ScenarioArgs {
  std::string name;
  fs::path out_dir;
};

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);
int cmd_merge(const MergeArgs& args, std::ostream& out, std::ostream& err);
int cmd_envelope(const EnvelopeArgs& args, std::ostream& out, std::ostream& err);
/// Writes a built-in scenario as world.txt plus one mission file per agent.
int cmd_scenario(const ScenarioArgs& args, std::ostream& out, std::ostream& err);

/// One report.csv row for a merge step.
std::string report_row(const MergeReport& r);
inline constexpr const char* kReportHeader =
    "k_i,k_j,desc_dist,r1,r2,Te,Re_frob,Re_deg,converged,ms_query,ms_sample,ms_gicp,ms_total";

}  // namespace framekit::cli
