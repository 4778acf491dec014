#include "framekit/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "framekit/errors.hpp"

namespace framekit::io {

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// Shortest text that reads back to the same float32.
void put_float(std::string& out, double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), static_cast<float>(value));
  out.append(buf.data(), res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t at = line.find(sep, begin);
    out.push_back(line.substr(begin, at == std::string_view::npos ? std::string_view::npos : at - begin));
    if (at == std::string_view::npos) break;
    begin = at + 1;
  }
  return out;
}

std::vector<std::string> words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// --- PLY ---

struct PlyProperty {
  std::string name;
  std::string type;
};

std::size_t ply_type_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "float" || type == "int32" || type == "uint32" || type == "float32") {
    return 4;
  }
  if (type == "double" || type == "float64") return 8;
  return 0;
}

double read_binary_value(const char* data, const std::string& type) {
  auto get = [data]<typename T>(T) {
    T v;
    std::memcpy(&v, data, sizeof(T));
    return static_cast<double>(v);
  };
  if (type == "char" || type == "int8") return get(std::int8_t{});
  if (type == "uchar" || type == "uint8") return get(std::uint8_t{});
  if (type == "short" || type == "int16") return get(std::int16_t{});
  if (type == "ushort" || type == "uint16") return get(std::uint16_t{});
  if (type == "int" || type == "int32") return get(std::int32_t{});
  if (type == "uint" || type == "uint32") return get(std::uint32_t{});
  if (type == "float" || type == "float32") return get(float{});
  return get(double{});
}

}  // namespace

std::string read_text(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_ply(const fs::path& path, const PointCloud& cloud) {
  cloud.validate();
  std::string body;
  body.reserve(cloud.size() * 30 + 128);
  body += "ply\nformat ascii 1.0\ncomment frame " + (cloud.frame.empty() ? std::string("unknown") : cloud.frame) + "\n";
  body += "element vertex " + std::to_string(cloud.size()) + "\n";
  body += "property float x\nproperty float y\nproperty float z\nend_header\n";
  for (const auto& p : cloud.points) {
    put_float(body, p.x());
    body += ' ';
    put_float(body, p.y());
    body += ' ';
    put_float(body, p.z());
    body += '\n';
  }
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PointCloud load_ply(const fs::path& path) {
  const std::string source = path.string();
  const std::string data = read_text(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::optional<std::string> {
    if (pos >= data.size()) return std::nullopt;
    const std::size_t end = data.find('\n', pos);
    std::string line = data.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    pos = end == std::string::npos ? data.size() : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(source, ParseError::Unit::Line, line_no, what);
  };

  auto magic = next_line();
  if (!magic || *magic != "ply") throw fail("missing 'ply' magic");

  enum class Format { None, Ascii, Binary } format = Format::None;
  std::size_t vertex_count = 0;
  bool seen_vertex = false;
  bool in_vertex = false;
  bool vertex_done = false;
  std::vector<PlyProperty> props;
  PointCloud cloud;
  while (true) {
    auto line = next_line();
    if (!line) throw fail("unexpected end of header");
    const auto w = words(*line);
    if (w.empty()) continue;
    if (w[0] == "end_header") break;
    if (w[0] == "comment") {
      if (w.size() >= 3 && w[1] == "frame" && w[2] != "unknown") cloud.frame = w[2];
      continue;
    }
    if (w[0] == "obj_info") continue;
    if (w[0] == "format") {
      if (w.size() != 3 || w[2] != "1.0") throw fail("unsupported format line");
      if (w[1] == "ascii") format = Format::Ascii;
      else if (w[1] == "binary_little_endian") format = Format::Binary;
      else throw fail("unsupported PLY encoding '" + w[1] + "'");
    } else if (w[0] == "element") {
      if (w.size() != 3) throw fail("malformed element line");
      if (in_vertex) vertex_done = true;
      in_vertex = w[1] == "vertex";
      if (in_vertex) {
        if (seen_vertex) throw fail("duplicate vertex element");
        seen_vertex = true;
        const auto n = parse_double(w[2]);
        if (!n || *n < 0 || std::floor(*n) != *n) throw fail("bad vertex count");
        vertex_count = static_cast<std::size_t>(*n);
      } else if (!vertex_done || !seen_vertex) {
        throw fail("only files whose first element is 'vertex' are supported");
      }
    } else if (w[0] == "property") {
      if (!in_vertex) continue;
      if (w.size() != 3) throw fail("unsupported vertex property (lists are not allowed)");
      if (ply_type_size(w[1]) == 0) throw fail("unknown property type '" + w[1] + "'");
      props.push_back({w[2], w[1]});
    } else {
      throw fail("unexpected header keyword '" + w[0] + "'");
    }
  }
  if (format == Format::None) throw fail("missing format line");
  if (!seen_vertex) throw fail("missing vertex element");
  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw fail("vertex element lacks x, y or z");

  cloud.points.reserve(vertex_count);
  if (format == Format::Ascii) {
    for (std::size_t n = 0; n < vertex_count; ++n) {
      auto line = next_line();
      if (!line) throw fail("expected " + std::to_string(vertex_count) + " vertices, file ends after " + std::to_string(n));
      const auto w = words(*line);
      if (w.size() != props.size()) throw fail("expected " + std::to_string(props.size()) + " values");
      Point3 p;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const auto v = parse_double(w[i]);
        if (!v) throw fail("not a number: '" + w[i] + "'");
        if (!std::isfinite(*v)) throw fail("non-finite coordinate");
        if (static_cast<int>(i) == ix) p.x() = *v;
        if (static_cast<int>(i) == iy) p.y() = *v;
        if (static_cast<int>(i) == iz) p.z() = *v;
      }
      cloud.points.push_back(p);
    }
    while (auto line = next_line()) {
      if (line->find_first_not_of(" \t") != std::string::npos) throw fail("trailing data after the vertex list");
    }
  } else {
    std::size_t stride = 0;
    for (const auto& p : props) stride += ply_type_size(p.type);
    if (data.size() - pos < vertex_count * stride) {
      throw ParseError(source, ParseError::Unit::Byte, data.size(), "binary vertex data truncated");
    }
    for (std::size_t n = 0; n < vertex_count; ++n) {
      const std::size_t record = pos + n * stride;
      std::size_t offset = record;
      Point3 p;
      for (std::size_t i = 0; i < props.size(); ++i) {
        const double v = read_binary_value(data.data() + offset, props[i].type);
        if (!std::isfinite(v)) throw ParseError(source, ParseError::Unit::Byte, offset, "non-finite coordinate");
        if (static_cast<int>(i) == ix) p.x() = v;
        if (static_cast<int>(i) == iy) p.y() = v;
        if (static_cast<int>(i) == iz) p.z() = v;
        offset += ply_type_size(props[i].type);
      }
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

// --- trajectory CSV ---

void save_traj_csv(const fs::path& path, const Trajectory& trajectory, const std::vector<double>& thresholds) {
  if (thresholds.size() != trajectory.size()) throw std::invalid_argument("save_traj_csv: one threshold per pose");
  std::string body = "k,x,y,z,yaw,th\n";
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const auto& p = trajectory[k];
    if (!p.position.allFinite() || (p.yaw && !std::isfinite(*p.yaw)) || !std::isfinite(thresholds[k])) {
      throw std::invalid_argument("save_traj_csv: non-finite value at k=" + std::to_string(k));
    }
    body += std::to_string(k);
    for (int a = 0; a < 3; ++a) {
      body += ',';
      put_float(body, p.position(a));
    }
    body += ',';
    if (p.yaw) put_float(body, *p.yaw);
    body += ',';
    put_float(body, thresholds[k]);
    body += '\n';
  }
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

TrajectoryTable load_traj_csv(const fs::path& path) {
  const std::string source = path.string();
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) { return ParseError(source, ParseError::Unit::Line, line_no, what); };

  ++line_no;
  if (!std::getline(in, line)) throw fail("missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "k,x,y,z,yaw,th") throw fail("expected header 'k,x,y,z,yaw,th'");

  TrajectoryTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 6) throw fail("expected 6 fields, found " + std::to_string(cells.size()));
    const auto k = parse_double(cells[0]);
    if (!k || *k != static_cast<double>(table.trajectory.size())) {
      throw fail("keyframe index must count up from 0");
    }
    Pose3 pose;
    for (int a = 0; a < 3; ++a) {
      const auto v = parse_double(cells[1 + a]);
      if (!v || !std::isfinite(*v)) throw fail("bad coordinate '" + std::string(cells[1 + a]) + "'");
      pose.position(a) = *v;
    }
    if (!cells[4].empty()) {
      const auto yaw = parse_double(cells[4]);
      if (!yaw || !std::isfinite(*yaw)) throw fail("bad yaw '" + std::string(cells[4]) + "'");
      pose.yaw = normalize_angle(*yaw);
    }
    const auto th = parse_double(cells[5]);
    if (!th || !std::isfinite(*th) || *th < 0.0) throw fail("bad threshold '" + std::string(cells[5]) + "'");
    table.trajectory.push_back(pose);
    table.thresholds.push_back(*th);
  }
  return table;
}

// --- FRMD descriptor stacks ---

namespace {

constexpr char kMagic[4] = {'F', 'R', 'M', 'D'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 2 + 4;
constexpr std::size_t kRecordSize = 2 * kDescriptorSize * sizeof(float);

}  // namespace

void save_desc(const fs::path& path, const std::vector<PlaceDescriptor>& q, const std::vector<OrientationDescriptor>& w) {
  if (q.size() != w.size()) throw std::invalid_argument("save_desc: stacks differ in length");
  if (q.size() > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("save_desc: too many records");
  std::string body(kHeaderSize + q.size() * kRecordSize, '\0');
  std::memcpy(body.data(), kMagic, 4);
  std::memcpy(body.data() + 4, &kVersion, 2);
  const auto count = static_cast<std::uint32_t>(q.size());
  std::memcpy(body.data() + 6, &count, 4);
  char* at = body.data() + kHeaderSize;
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (const DescriptorVector* v : {&q[i].values, &w[i].values}) {
      if (!v->allFinite()) throw std::invalid_argument("save_desc: non-finite descriptor at record " + std::to_string(i));
      for (int j = 0; j < kDescriptorSize; ++j) {
        const auto f = static_cast<float>((*v)(j));
        std::memcpy(at, &f, sizeof f);
        at += sizeof f;
      }
    }
  }
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::pair<std::vector<PlaceDescriptor>, std::vector<OrientationDescriptor>> load_desc(const fs::path& path) {
  const std::string source = path.string();
  const std::string data = read_text(path);
  auto fail = [&](std::size_t byte, const std::string& what) {
    return ParseError(source, ParseError::Unit::Byte, byte, what);
  };
  if (data.size() < kHeaderSize) throw fail(data.size(), "file shorter than the FRMD header");
  if (std::memcmp(data.data(), kMagic, 4) != 0) throw fail(0, "bad magic, expected FRMD");
  std::uint16_t version = 0;
  std::memcpy(&version, data.data() + 4, 2);
  if (version != kVersion) throw fail(4, "unsupported version " + std::to_string(version));
  std::uint32_t count = 0;
  std::memcpy(&count, data.data() + 6, 4);
  const std::size_t expected = kHeaderSize + static_cast<std::size_t>(count) * kRecordSize;
  if (data.size() != expected) {
    throw fail(std::min(data.size(), expected), "size mismatch: header announces " + std::to_string(count) +
                                                    " records (" + std::to_string(expected) + " bytes), file has " +
                                                    std::to_string(data.size()));
  }

  std::pair<std::vector<PlaceDescriptor>, std::vector<OrientationDescriptor>> out;
  out.first.resize(count);
  out.second.resize(count);
  std::size_t offset = kHeaderSize;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t record = offset;
    for (int half = 0; half < 2; ++half) {
      DescriptorVector& v = half == 0 ? out.first[i].values : out.second[i].values;
      for (int j = 0; j < kDescriptorSize; ++j) {
        float f = 0.0F;
        std::memcpy(&f, data.data() + offset, sizeof f);
        if (!std::isfinite(f)) throw fail(offset, "non-finite descriptor value");
        if (half == 1 && f < 0.0F) throw fail(offset, "negative orientation value");
        v(j) = f;
        offset += sizeof f;
      }
    }
    if (std::abs(out.first[i].values.norm() - 1.0) > 1e-4) throw fail(record, "place vector is not unit length");
  }
  return out;
}

// --- JSON transforms ---

namespace {

nlohmann::json transform_to_json(const RigidTransformd& t) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({t.rotation()(r, 0), t.rotation()(r, 1), t.rotation()(r, 2)});
  return {{"rotation", rot}, {"translation", {t.translation().x(), t.translation().y(), t.translation().z()}}};
}

RigidTransformd transform_from_json(const nlohmann::json& j) {
  Eigen::Matrix3d r;
  Point3 t;
  const auto& rot = j.at("rotation");
  const auto& tr = j.at("translation");
  if (!rot.is_array() || rot.size() != 3 || !tr.is_array() || tr.size() != 3) {
    throw std::invalid_argument("transform needs a 3x3 rotation and a 3-vector translation");
  }
  for (int a = 0; a < 3; ++a) {
    if (!rot[a].is_array() || rot[a].size() != 3) throw std::invalid_argument("rotation rows must have 3 entries");
    for (int b = 0; b < 3; ++b) r(a, b) = rot[a][b].get<double>();
    t(a) = tr[a].get<double>();
  }
  if (!r.allFinite() || !t.allFinite()) throw std::invalid_argument("non-finite transform entry");
  return RigidTransformd(r, t);
}

}  // namespace

void save_transform_json(const fs::path& path, const RigidTransformd& world_from_map) {
  nlohmann::json j = {{"world_from_map", transform_to_json(world_from_map)}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RigidTransformd load_transform_json(const fs::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    return transform_from_json(j.at("world_from_map"));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), ParseError::Unit::Byte, e.byte, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), ParseError::Unit::Byte, 0, e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string(), ParseError::Unit::Byte, 0, e.what());
  }
}

// --- whole logs ---

fs::path log_prefix(const fs::path& any) {
  const std::string s = any.string();
  for (const char* suffix : {".map.ply", ".traj.csv", ".desc.bin", ".gt.json"}) {
    const std::string suf(suffix);
    if (s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
      return s.substr(0, s.size() - suf.size());
    }
  }
  return any;
}

void save_log(const fs::path& dir, const std::string& name, const KeyframeLog& log,
              const std::optional<RigidTransformd>& world_from_map) {
  if (!log.consistent()) throw std::invalid_argument("save_log: stacks have unequal lengths");
  fs::create_directories(dir);
  const fs::path base = dir / name;
  save_ply(base.string() + ".map.ply", log.map);
  save_traj_csv(base.string() + ".traj.csv", log.trajectory, log.thresholds);
  save_desc(base.string() + ".desc.bin", log.place_stack, log.orient_stack);
  if (world_from_map) save_transform_json(base.string() + ".gt.json", *world_from_map);
}

KeyframeLog load_log(const fs::path& prefix_or_file) {
  const std::string base = log_prefix(prefix_or_file).string();
  KeyframeLog log;
  log.map = load_ply(base + ".map.ply");
  if (log.map.frame.empty()) log.map.frame = "map";
  auto table = load_traj_csv(base + ".traj.csv");
  log.trajectory = std::move(table.trajectory);
  log.thresholds = std::move(table.thresholds);
  auto [q, w] = load_desc(base + ".desc.bin");
  log.place_stack = std::move(q);
  log.orient_stack = std::move(w);
  if (!log.consistent()) {
    throw ParseError(base + ".desc.bin", ParseError::Unit::Byte, 6,
                     "descriptor count " + std::to_string(log.place_stack.size()) + " does not match " +
                         std::to_string(log.trajectory.size()) + " trajectory rows");
  }
  return log;
}

std::optional<RigidTransformd> load_log_ground_truth(const fs::path& prefix_or_file) {
  const fs::path gt = log_prefix(prefix_or_file).string() + ".gt.json";
  if (!fs::exists(gt)) return std::nullopt;
  return load_transform_json(gt);
}

}  // namespace framekit::io
