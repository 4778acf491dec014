#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "framekit/keyframe.hpp"
#include "framekit/pipeline.hpp"

namespace framekit::io {

namespace fs = std::filesystem;

/// ASCII PLY with float x, y, z vertex properties. Values are written at float32 precision.
void save_ply(const fs::path& path, const PointCloud& cloud);
/// Reads ASCII or binary little-endian PLY. Vertex properties other than x, y, z are skipped.
/// Throws ParseError (line for ASCII, byte offset for binary) on malformed input or NaN/Inf.
PointCloud load_ply(const fs::path& path);

struct TrajectoryTable {
  Trajectory trajectory;
  std::vector<double> thresholds;
};

/// Header `k,x,y,z,yaw,th`; an absent yaw is an empty field.
void save_traj_csv(const fs::path& path, const Trajectory& trajectory, const std::vector<double>& thresholds);
TrajectoryTable load_traj_csv(const fs::path& path);

/// Descriptor stack: "FRMD", u16 version, u32 count, then count x (64 f32 q + 64 f32 w), little-endian.
void save_desc(const fs::path& path, const std::vector<PlaceDescriptor>& q, const std::vector<OrientationDescriptor>& w);
std::pair<std::vector<PlaceDescriptor>, std::vector<OrientationDescriptor>> load_desc(const fs::path& path);

void save_transform_json(const fs::path& path, const RigidTransformd& world_from_map);
RigidTransformd load_transform_json(const fs::path& path);

/// Writes <name>.map.ply, <name>.traj.csv, <name>.desc.bin and, when given, <name>.gt.json.
void save_log(const fs::path& dir, const std::string& name, const KeyframeLog& log,
              const std::optional<RigidTransformd>& world_from_map = std::nullopt);

/// Loads the three log files sharing `prefix` (e.g. "out/agent1" or "out/agent1.map.ply").
KeyframeLog load_log(const fs::path& prefix);
/// Ground truth next to a log, if present.
std::optional<RigidTransformd> load_log_ground_truth(const fs::path& prefix);

/// Strips a known log-file suffix, so any of the four files names the log.
fs::path log_prefix(const fs::path& any);

std::string read_text(const fs::path& path);

}  // namespace framekit::io
