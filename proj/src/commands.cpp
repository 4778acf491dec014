#include "framekit/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "framekit/errors.hpp"
#include "framekit/io.hpp"

namespace framekit::cli {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string trim(std::string s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

class ValueReader {
 public:
  ValueReader(std::string source, std::size_t line, std::string key, std::string value)
      : source_(std::move(source)), line_(line), key_(std::move(key)), value_(std::move(value)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(source_, ParseError::Unit::Line, line_, key_ + ": " + what);
  }

  double number() const {
    std::istringstream in(value_);
    double v = 0.0;
    std::string rest;
    if (!(in >> v) || (in >> rest) || !std::isfinite(v)) fail("expected a finite number, got '" + value_ + "'");
    return v;
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be > 0");
    return v;
  }

  double nonnegative() const {
    const double v = number();
    if (v < 0.0) fail("must be >= 0");
    return v;
  }

  int integer(int min) const {
    const double v = number();
    if (std::floor(v) != v || v < min || v > 1e9) fail("expected an integer >= " + std::to_string(min));
    return static_cast<int>(v);
  }

  bool boolean() const {
    if (value_ == "true" || value_ == "1" || value_ == "yes" || value_ == "on") return true;
    if (value_ == "false" || value_ == "0" || value_ == "no" || value_ == "off") return false;
    fail("expected true or false, got '" + value_ + "'");
  }

  std::vector<double> list() const {
    std::string text = value_;
    for (char& c : text) {
      if (c == ',') c = ' ';
    }
    std::istringstream in(text);
    std::vector<double> out;
    std::string item;
    while (in >> item) {
      char* end = nullptr;
      const double v = std::strtod(item.c_str(), &end);
      if (end != item.c_str() + item.size() || !std::isfinite(v)) fail("bad list entry '" + item + "'");
      out.push_back(v);
    }
    if (out.empty()) fail("empty list");
    return out;
  }

  Point3 point() const {
    const auto v = list();
    if (v.size() != 3) fail("expected three numbers");
    return {v[0], v[1], v[2]};
  }

  std::string text() const {
    if (value_.empty()) fail("empty value");
    return value_;
  }

 private:
  std::string source_;
  std::size_t line_;
  std::string key_;
  std::string value_;
};

// Applies a gicp.* key; false when the key is not one.
bool apply_gicp_key(GicpConfig& g, const std::string& key, const ValueReader& v) {
  if (key == "gicp.k_neighbors") g.k_neighbors = v.integer(4);
  else if (key == "gicp.max_correspondence_distance") g.max_correspondence_distance = v.positive();
  else if (key == "gicp.max_iterations") g.max_iterations = v.integer(1);
  else if (key == "gicp.translation_epsilon") g.translation_epsilon = v.positive();
  else if (key == "gicp.rotation_epsilon") g.rotation_epsilon = v.positive();
  else if (key == "gicp.plane_regularization") g.plane_regularization = v.positive();
  else if (key == "gicp.voxel_leaf") g.voxel_leaf = v.nonnegative();
  else return false;
  return true;
}

template <typename Fn>
void for_each_entry(const KeyValues& kv, const std::string& source, const std::set<std::string>& repeatable, Fn&& fn) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < kv.entries.size(); ++i) {
    const auto& [key, value] = kv.entries[i];
    if (!repeatable.count(key) && !seen.insert(key).second) {
      throw ParseError(source, ParseError::Unit::Line, kv.lines[i], "duplicate key '" + key + "'");
    }
    fn(key, ValueReader(source, kv.lines[i], key, value), kv.lines[i]);
  }
}

std::string fmt(double v, int precision = 6) {
  if (!std::isfinite(v)) return "";
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

nlohmann::json transform_json(const RigidTransformd& t) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({t.rotation()(r, 0), t.rotation()(r, 1), t.rotation()(r, 2)});
  return {{"rotation", rot},
          {"translation", {t.translation().x(), t.translation().y(), t.translation().z()}},
          {"yaw_deg", t.yaw() / kDeg}};
}

// Runs a command body, mapping input problems to exit 2.
template <typename Fn>
int guarded(std::ostream& err, const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    err << name << ": parse error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << name << ": invalid input: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << '\n';
  }
  return kExitUsage;
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, ParseError::Unit::Line, number, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source, ParseError::Unit::Line, number, "empty key");
    kv.entries.emplace_back(std::move(key), trim(line.substr(eq + 1)));
    kv.lines.push_back(number);
  }
  return kv;
}

Config parse_config(const std::string& text, const std::string& source) {
  Config c;
  for_each_entry(parse_key_values(text, source), source, {}, [&](const std::string& key, const ValueReader& v, std::size_t) {
    if (apply_gicp_key(c.gicp, key, v)) return;
    if (key == "projection.width") c.projection.width = v.integer(1);
    else if (key == "projection.height") c.projection.height = v.integer(1);
    else if (key == "projection.fov_up_deg") c.projection.fov_up = v.number() * kDeg;
    else if (key == "projection.fov_down_deg") c.projection.fov_down = v.number() * kDeg;
    else if (key == "projection.max_range") c.projection.max_range = v.positive();
    else if (key == "keyframe.rot_threshold_deg") c.rot_threshold = v.positive() * kDeg;
    else if (key == "merge.min_inlier_fraction") {
      c.merge.min_inlier_fraction = v.nonnegative();
      if (c.merge.min_inlier_fraction > 1.0) v.fail("must be <= 1");
    } else if (key == "merge.tight_correspondence") c.merge.tight_correspondence = v.boolean();
    else if (key == "merge.tight_pose_distance") c.merge.tight_pose_distance = v.nonnegative();
    else if (key == "merge.tight_max_correspondence") c.merge.tight_max_correspondence = v.positive();
    else if (key == "union.downsample") c.merge.downsample_union = v.boolean();
    else if (key == "union.leaf") c.merge.union_leaf = v.positive();
    else if (key == "output.merged") c.merged_name = v.text();
    else if (key == "output.report") c.report_name = v.text();
    else if (key == "output.transforms") c.transforms_name = v.text();
    else v.fail("unknown key");
  });
  try {
    c.projection.validate();
    c.gicp.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, ParseError::Unit::Line, 0, e.what());
  }
  c.merge.gicp = c.gicp;
  return c;
}

Sweep parse_sweep(const std::string& text, const std::string& source) {
  Sweep s;
  for_each_entry(parse_key_values(text, source), source, {}, [&](const std::string& key, const ValueReader& v, std::size_t) {
    if (apply_gicp_key(s.options.gicp, key, v)) return;
    if (key == "offsets") s.offsets = v.list();
    else if (key == "yaws_deg") s.yaws_deg = v.list();
    else if (key == "radii") s.radii = v.list();
    else if (key == "trials") s.options.trials = v.integer(1);
    else if (key == "seed") s.options.seed = static_cast<std::uint64_t>(v.integer(0));
    else if (key == "success_threshold") s.options.success_threshold = v.positive();
    else if (key == "min_segment_length") s.options.min_segment_length = v.nonnegative();
    else v.fail("unknown key");
    if (key == "offsets" || key == "yaws_deg") {
      for (double x : key == "offsets" ? s.offsets : s.yaws_deg) {
        if (x < 0.0) v.fail("entries must be >= 0");
      }
    }
    if (key == "radii") {
      for (double x : s.radii) {
        if (!(x > 0.0)) v.fail("entries must be > 0");
      }
    }
  });
  if (s.offsets.empty() || s.yaws_deg.empty() || s.radii.empty()) {
    throw ParseError(source, ParseError::Unit::Line, 0, "offsets, yaws_deg and radii are required");
  }
  try {
    s.options.gicp.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, ParseError::Unit::Line, 0, e.what());
  }
  return s;
}

MissionSpec parse_mission(const std::string& text, const std::string& source) {
  MissionSpec m;
  double yaw = 0.0;
  Point3 t = Point3::Zero();
  for_each_entry(parse_key_values(text, source), source, {"waypoint"},
                 [&](const std::string& key, const ValueReader& v, std::size_t) {
                   if (key == "name") {
                     m.name = v.text();
                     if (m.name.find_first_of("/\\ ") != std::string::npos) v.fail("name must not contain spaces or slashes");
                   } else if (key == "waypoint") m.waypoints.push_back(v.point());
                   else if (key == "frame_yaw_deg") yaw = v.number();
                   else if (key == "frame_translation") t = v.point();
                   else v.fail("unknown key");
                 });
  if (m.name.empty()) throw ParseError(source, ParseError::Unit::Line, 0, "missing name");
  if (m.waypoints.empty()) throw ParseError(source, ParseError::Unit::Line, 0, "at least one waypoint required");
  m.world_from_map = RigidTransformd(yaw_matrix(yaw * kDeg), t);
  return m;
}

std::string format_mission(const MissionSpec& mission) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "name = " << mission.name << '\n';
  out << "frame_yaw_deg = " << mission.world_from_map.yaw() / kDeg << '\n';
  const Point3& t = mission.world_from_map.translation();
  out << "frame_translation = " << t.x() << ' ' << t.y() << ' ' << t.z() << '\n';
  for (const auto& w : mission.waypoints) out << "waypoint = " << w.x() << ' ' << w.y() << ' ' << w.z() << '\n';
  return out.str();
}

std::string report_row(const MergeReport& r) {
  std::ostringstream out;
  out << r.match.k_i << ',' << r.match.k_j << ',' << fmt(r.match.distance) << ',' << fmt(r.radius1) << ','
      << fmt(r.radius2) << ',';
  if (r.errors) {
    out << fmt(r.errors->translation) << ',' << fmt(r.errors->rotation_frob) << ',' << fmt(r.errors->rotation_deg);
  } else {
    out << ",,";
  }
  out << ',' << (r.converged ? "true" : "false") << ',' << fmt(r.timings.query_ms) << ',' << fmt(r.timings.sample_ms)
      << ',' << fmt(r.timings.gicp_ms) << ',' << fmt(r.timings.total_ms);
  return out.str();
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, "synth", [&] {
    const auto segments = parse_world_spec(io::read_text(args.world));
    if (segments.empty()) throw ParseError(args.world.string(), ParseError::Unit::Line, 0, "no segments");
    if (args.missions.empty()) throw std::invalid_argument("at least one mission file required");
    Config config;
    if (args.config) config = parse_config(io::read_text(*args.config), args.config->string());

    std::vector<MissionSpec> missions;
    std::set<std::string> names;
    for (const auto& path : args.missions) {
      missions.push_back(parse_mission(io::read_text(path), path.string()));
      if (!names.insert(missions.back().name).second) {
        throw std::invalid_argument("duplicate mission name '" + missions.back().name + "'");
      }
    }
    const SyntheticWorld world = build_world(segments, args.noise, args.seed);
    fs::create_directories(args.out_dir);
    for (std::size_t i = 0; i < missions.size(); ++i) {
      MissionOptions options;
      options.world_from_map = missions[i].world_from_map;
      options.rot_threshold = config.rot_threshold;
      options.salt = 1000 + i;
      const KeyframeLog log = simulate_mission(world, missions[i].waypoints, config.projection, options);
      io::save_log(args.out_dir, missions[i].name, log, missions[i].world_from_map);
      out << missions[i].name << ": " << log.size() << " keyframes, " << log.map.size() << " points\n";
    }
    return kExitOk;
  });
}

int cmd_merge(const MergeArgs& args, std::ostream& out, std::ostream& err) {
  // Input problems exit 2, a failed merge step exits 1.
  Config config;
  std::vector<KeyframeLog> logs;
  std::vector<std::string> names;
  std::optional<std::vector<RigidTransformd>> truth;
  const int loaded = guarded(err, "merge", [&] {
    if (args.logs.size() < 2) throw std::invalid_argument("at least two logs required");
    if (args.config) config = parse_config(io::read_text(*args.config), args.config->string());
    if (args.downsample) config.merge.downsample_union = *args.downsample;
    std::vector<RigidTransformd> gts;
    for (const auto& path : args.logs) {
      logs.push_back(io::load_log(path));
      names.push_back(io::log_prefix(path).filename().string());
      if (auto gt = io::load_log_ground_truth(path)) gts.push_back(*gt);
    }
    if (gts.size() == logs.size()) truth = std::move(gts);
    fs::create_directories(args.out_dir);
    return kExitOk;
  });
  if (loaded != kExitOk) return loaded;

  std::string report = std::string(kReportHeader) + "\n";
  nlohmann::json transforms = nlohmann::json::array();
  auto flush = [&] {
    write_file(args.out_dir / config.report_name, report);
    write_file(args.out_dir / config.transforms_name, nlohmann::json{{"reference", names.front()}, {"transforms", transforms}}.dump(2) + "\n");
  };
  try {
    const SequenceReport result =
        merge_sequence(logs, config.merge, truth, [&](std::size_t step, const MergeReport& r) {
          report += report_row(r) + "\n";
          nlohmann::json entry = transform_json(r.transform);
          entry["log"] = names[step];
          entry["step"] = step;
          transforms.push_back(entry);
          out << "step " << step << " (" << names[step] << "): k_i=" << r.match.k_i << " k_j=" << r.match.k_j
              << " r=" << r.radius1 << "/" << r.radius2 << " converged";
          if (r.errors) out << " Te=" << fmt(r.errors->translation, 4) << " Re=" << fmt(r.errors->rotation_deg, 4) << "deg";
          out << " " << fmt(r.timings.total_ms, 4) << " ms\n";
        });
    io::save_ply(args.out_dir / config.merged_name, result.global_map);
    flush();
    out << "merged map: " << result.global_map.size() << " points\n";
    return kExitOk;
  } catch (const MergeFailure& f) {
    report += report_row(f.partial()) + "\n";
    try {
      flush();
    } catch (const std::exception& e) {
      err << "merge: " << e.what() << '\n';
    }
    err << "merge: step " << f.step() << " (" << names[f.step()] << ") failed: " << f.what() << '\n';
    return kExitMergeFailure;
  } catch (const std::exception& e) {
    err << "merge: " << e.what() << '\n';
    return kExitUsage;
  }
}

int cmd_envelope(const EnvelopeArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, "envelope", [&] {
    const auto segments = parse_world_spec(io::read_text(args.world));
    if (segments.empty()) throw ParseError(args.world.string(), ParseError::Unit::Line, 0, "no segments");
    const Sweep sweep = parse_sweep(io::read_text(args.sweep), args.sweep.string());
    const SyntheticWorld world = build_world(segments, args.noise, args.seed);
    const auto grid = failure_envelope(world, sweep.offsets, sweep.yaws_deg, sweep.radii, sweep.options);
    std::string body = "offset,yaw,radius,success_rate,mean_Te,mean_ms\n";
    for (const auto& c : grid) {
      body += fmt(c.offset) + ',' + fmt(c.yaw_deg) + ',' + fmt(c.radius) + ',' + fmt(c.success_rate) + ',' +
              fmt(c.mean_error) + ',' + fmt(c.mean_ms) + '\n';
    }
    if (args.out_csv.has_parent_path()) fs::create_directories(args.out_csv.parent_path());
    write_file(args.out_csv, body);
    out << grid.size() << " cells written to " << args.out_csv.string() << '\n';
    return kExitOk;
  });
}

int cmd_scenario(const ScenarioArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, "scenario", [&] {
    std::optional<Scenario> chosen;
    std::string known;
    for (auto& s : acceptance_scenarios()) {
      known += (known.empty() ? "" : ", ") + s.name;
      if (s.name == args.name) chosen = std::move(s);
    }
    if (!chosen) throw std::invalid_argument("unknown scenario '" + args.name + "' (known: " + known + ")");
    fs::create_directories(args.out_dir);
    write_file(args.out_dir / "world.txt", format_world_spec(chosen->segments));
    for (const auto& m : chosen->missions) {
      write_file(args.out_dir / (m.name + ".mission"), format_mission(m));
    }
    out << chosen->name << ": world.txt and " << chosen->missions.size() << " mission files in "
        << args.out_dir.string() << " (noise " << chosen->noise_sigma << ", seed " << chosen->seed << ")\n";
    return kExitOk;
  });
}

}  // namespace framekit::cli
