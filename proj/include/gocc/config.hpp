#ifndef GOCC_CONFIG_HPP
#define GOCC_CONFIG_HPP

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gocc/scene.hpp"

namespace gocc {

/// Raised for malformed or incomplete configuration input. Messages name the
/// file, the offending line or key, and what was expected.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Plain-text configuration: one `key = value` per line, `#` starts a
/// comment, blank lines are ignored. A key may repeat; scalar lookups take
/// the last occurrence (later lines override earlier ones) while all() keeps
/// every occurrence in file order for list-like keys.
class KeyValueConfig {
 public:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };

  static KeyValueConfig parse_string(const std::string& text,
                                     const std::string& name = "<config>") {
    KeyValueConfig cfg;
    cfg.name_ = name;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(name + " line " + std::to_string(line_no) +
                          ": expected 'key = value'");
      Entry e;
      e.key = detail::trim(line.substr(0, eq));
      e.value = detail::trim(line.substr(eq + 1));
      e.line = line_no;
      if (e.key.empty())
        throw ConfigError(name + " line " + std::to_string(line_no) + ": empty key");
      cfg.entries_.push_back(std::move(e));
    }
    return cfg;
  }

  static KeyValueConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_string(text.str(), path);
  }

  const std::string& name() const { return name_; }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  std::vector<Entry> all(const std::string& key) const {
    std::vector<Entry> out;
    for (const Entry& e : entries_)
      if (e.key == key) out.push_back(e);
    return out;
  }

  std::string get_string(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) throw ConfigError(name_ + ": missing required key '" + key + "'");
    return e->value;
  }

  std::string get_string_or(const std::string& key, const std::string& fallback) const {
    const Entry* e = find(key);
    return e ? e->value : fallback;
  }

  double get_double(const std::string& key) const { return to_double(*require(key)); }
  double get_double_or(const std::string& key, double fallback) const {
    const Entry* e = find(key);
    return e ? to_double(*e) : fallback;
  }

  long long get_int(const std::string& key) const { return to_int(*require(key)); }
  long long get_int_or(const std::string& key, long long fallback) const {
    const Entry* e = find(key);
    return e ? to_int(*e) : fallback;
  }

  /// Exactly n whitespace-separated numbers.
  std::vector<double> get_doubles(const std::string& key, std::size_t n) const {
    const Entry* e = require(key);
    const std::vector<double> v = split_doubles(*e);
    if (v.size() != n)
      throw ConfigError(name_ + " line " + std::to_string(e->line) + ": key '" + key +
                        "' expects " + std::to_string(n) + " numbers, got " +
                        std::to_string(v.size()));
    return v;
  }

  std::vector<double> get_doubles_or(const std::string& key, std::size_t n,
                                     const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    return get_doubles(key, n);
  }

  /// Numbers from an already located entry (used for list keys).
  std::vector<double> split_doubles(const Entry& e) const {
    std::vector<double> out;
    const char* s = e.value.c_str();
    while (*s) {
      char* end = nullptr;
      const double v = std::strtod(s, &end);
      if (end == s)
        throw ConfigError(name_ + " line " + std::to_string(e.line) + ": key '" + e.key +
                          "' expects numbers, got '" + e.value + "'");
      out.push_back(v);
      s = end;
      while (*s == ' ' || *s == '\t') ++s;
    }
    return out;
  }

 private:
  const Entry* find(const std::string& key) const {
    const Entry* hit = nullptr;
    for (const Entry& e : entries_)
      if (e.key == key) hit = &e;
    return hit;
  }

  const Entry* require(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) throw ConfigError(name_ + ": missing required key '" + key + "'");
    return e;
  }

  double to_double(const Entry& e) const {
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *detail::trim(end).c_str() != '\0')
      throw ConfigError(name_ + " line " + std::to_string(e.line) + ": key '" + e.key +
                        "' expects a number, got '" + e.value + "'");
    return v;
  }

  long long to_int(const Entry& e) const {
    const double v = to_double(e);
    const long long i = static_cast<long long>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError(name_ + " line " + std::to_string(e.line) + ": key '" + e.key +
                        "' expects an integer, got '" + e.value + "'");
    return i;
  }

  std::string name_;
  std::vector<Entry> entries_;
};

namespace detail {

// Heading yaw (radians about +z, 0 = +x) to a camera world-to-camera
// rotation: +z_cam looks along the heading, +x_cam points right, +y_cam
// down, so the image is upright with world +z at the top.
inline Mat3 camera_rotation_from_yaw(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 rot;
  rot << s, -c, 0.0,
      0.0, 0.0, -1.0,
      c, s, 0.0;
  return rot;
}

inline Primitive primitive_from_entry(const KeyValueConfig& cfg,
                                      const KeyValueConfig::Entry& e) {
  std::istringstream in(e.value);
  std::string kind;
  in >> kind;
  std::string rest;
  std::getline(in, rest);
  KeyValueConfig::Entry nums{e.key, trim(rest), e.line};
  const std::vector<double> v = cfg.split_doubles(nums);
  auto want = [&](std::size_t n, const char* shape) {
    if (v.size() != n)
      throw ConfigError(cfg.name() + " line " + std::to_string(e.line) + ": " + shape);
  };
  if (kind == "box") {
    want(8, "box expects cx cy cz hx hy hz yaw class");
    return make_box(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]), v[6],
                    static_cast<std::uint16_t>(v[7]));
  }
  if (kind == "sphere") {
    want(5, "sphere expects cx cy cz radius class");
    return make_sphere(Vec3(v[0], v[1], v[2]), v[3], static_cast<std::uint16_t>(v[4]));
  }
  if (kind == "ground") {
    want(2, "ground expects z class");
    return make_ground(v[0], static_cast<std::uint16_t>(v[1]));
  }
  throw ConfigError(cfg.name() + " line " + std::to_string(e.line) +
                    ": unknown primitive kind '" + kind + "'");
}

inline CameraModel camera_from_entry(const KeyValueConfig& cfg,
                                     const KeyValueConfig::Entry& e) {
  const std::vector<double> v = cfg.split_doubles(e);
  if (v.size() != 7)
    throw ConfigError(cfg.name() + " line " + std::to_string(e.line) +
                      ": camera expects width height focal x y z yaw");
  CameraModel cam;
  cam.width = static_cast<int>(v[0]);
  cam.height = static_cast<int>(v[1]);
  cam.fx = cam.fy = v[2];
  cam.cx = 0.5 * v[0];
  cam.cy = 0.5 * v[1];
  cam.rot = camera_rotation_from_yaw(v[6]);
  cam.trans = -(cam.rot * Vec3(v[3], v[4], v[5]));
  cam.validate();
  return cam;
}

inline SensorPose pose_from_entry(const KeyValueConfig& cfg,
                                  const KeyValueConfig::Entry& e) {
  const std::vector<double> v = cfg.split_doubles(e);
  if (v.size() != 4 && v.size() != 5)
    throw ConfigError(cfg.name() + " line " + std::to_string(e.line) +
                      ": lidar_pose expects x y z yaw [timestamp]");
  SensorPose pose;
  const double c = std::cos(v[3]), s = std::sin(v[3]);
  pose.rot << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  pose.trans = Vec3(v[0], v[1], v[2]);
  pose.timestamp = v.size() == 5 ? v[4] : 0.0;
  return pose;
}

}  // namespace detail

/// Scene description keys:
///   grid_min = x y z            grid_resolution = r | rx ry rz
///   grid_counts = nx ny nz      classes = n
///   seed = n
///   primitive = box cx cy cz hx hy hz yaw class
///   primitive = sphere cx cy cz radius class
///   primitive = ground z class
///   camera = width height focal x y z yaw            (repeatable)
///   lidar_pose = x y z yaw [timestamp]               (repeatable)
///   lidar_beams, lidar_azimuth_steps, lidar_elevation = min max,
///   lidar_max_range
/// Omitted grid and scanner keys keep the defaults; a scene with no
/// lidar_pose gets a single identity pose.
inline SceneSpec scene_from_config(const KeyValueConfig& cfg) {
  SceneSpec spec;
  const std::vector<double> lo =
      cfg.get_doubles_or("grid_min", 3, {spec.grid.origin.x(), spec.grid.origin.y(),
                                         spec.grid.origin.z()});
  spec.grid.origin = Vec3(lo[0], lo[1], lo[2]);
  if (cfg.has("grid_resolution")) {
    const auto entries = cfg.all("grid_resolution");
    const std::vector<double> r = cfg.split_doubles(entries.back());
    if (r.size() == 1)
      spec.grid.resolution = Vec3(r[0], r[0], r[0]);
    else if (r.size() == 3)
      spec.grid.resolution = Vec3(r[0], r[1], r[2]);
    else
      throw ConfigError(cfg.name() + " line " + std::to_string(entries.back().line) +
                        ": grid_resolution expects 1 or 3 numbers");
  }
  if (cfg.has("grid_counts")) {
    const std::vector<double> n = cfg.get_doubles("grid_counts", 3);
    spec.grid.counts = {static_cast<std::int64_t>(n[0]), static_cast<std::int64_t>(n[1]),
                        static_cast<std::int64_t>(n[2])};
  }
  spec.n_classes = static_cast<std::size_t>(cfg.get_int_or("classes", 4));
  spec.rng_seed = static_cast<std::uint64_t>(cfg.get_int_or("seed", 0));

  for (const auto& e : cfg.all("primitive"))
    spec.primitives.push_back(detail::primitive_from_entry(cfg, e));
  for (const auto& e : cfg.all("camera"))
    spec.rig.push_back(detail::camera_from_entry(cfg, e));
  for (const auto& e : cfg.all("lidar_pose"))
    spec.lidar.poses.push_back(detail::pose_from_entry(cfg, e));
  if (spec.lidar.poses.empty()) spec.lidar.poses.emplace_back();

  spec.lidar.beams = static_cast<int>(cfg.get_int_or("lidar_beams", spec.lidar.beams));
  spec.lidar.azimuth_steps =
      static_cast<int>(cfg.get_int_or("lidar_azimuth_steps", spec.lidar.azimuth_steps));
  const std::vector<double> elev = cfg.get_doubles_or(
      "lidar_elevation", 2, {spec.lidar.elevation_min, spec.lidar.elevation_max});
  spec.lidar.elevation_min = elev[0];
  spec.lidar.elevation_max = elev[1];
  spec.lidar.max_range = cfg.get_double_or("lidar_max_range", spec.lidar.max_range);

  try {
    validate_scene(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.name() + ": " + e.what());
  }
  return spec;
}

}  // namespace gocc

#endif
