#ifndef GOCC_IO_HPP
#define GOCC_IO_HPP

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gocc/attention.hpp"
#include "gocc/gaussian.hpp"
#include "gocc/grid.hpp"
#include "gocc/lidar.hpp"
#include "gocc/lifted.hpp"
#include "gocc/metrics.hpp"

// On-disk formats. All binary files are little-endian with a 4-byte magic:
//   GOC1  Gaussian set: u64 count, u32 n_classes, then per Gaussian
//         mean(3) rotation-wxyz(4) scale(3) opacity(1) logits(n_classes), f32.
//   LPC1  point cloud: u64 count, then x y z intensity per point, f32.
//   OGR1  occupancy grid: origin f64x3, max corner f64x3, resolution f64x3,
//         counts u64x3, u32 n_classes, u8 mode (0 logits, 1 labels), then
//         f32 logits (class-fastest) or u16 labels in z-fastest voxel order.
//   SDM1  sparse depth map: u32 scale, u32 width, u32 height, f64 d_max,
//         then (u32 missing-run, u32 literal-count, f32...) records covering
//         the image row-major.
//   GW3D  refinement-block weights: u32 dims (m, m_c, hidden, n_classes,
//         n_cameras, n_scales, n_r1, n_r2), f64 conv_cell_size, then each
//         field as u32 rows, u32 cols, row-major f32 data, in declaration
//         order: conv[0..26], offset1_w, offset1_b, offset2_w, offset2_b,
//         weight_w, weight_b, value_w, mlp_w1, mlp_b1, mlp_w2, mlp_b2.
//   FPY1  feature pyramid: u32 n_scales, then per scale u32 width, u32
//         height, u32 channels and the channel-fastest f32 feature data.

namespace gocc {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace detail {

class FileWriter {
 public:
  explicit FileWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  }

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw std::runtime_error("write failed: " + path_);
  }

  void magic(const char* tag) { bytes(tag, 4); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { bytes(&v, 2); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(double v) {
    const float f = static_cast<float>(v);
    bytes(&f, 4);
  }
  void f64(double v) { bytes(&v, 8); }

  void finish() {
    out_.close();
    if (!out_) throw std::runtime_error("close failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class FileReader {
 public:
  explicit FileReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open for reading: " + path);
  }

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw std::runtime_error("unexpected end of file: " + path_);
  }

  void expect_magic(const char* tag) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, tag, 4) != 0)
      throw std::runtime_error(path_ + ": bad magic, expected " + tag);
  }

  std::uint8_t u8() { return pod<std::uint8_t>(); }
  std::uint16_t u16() { return pod<std::uint16_t>(); }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  double f32() { return static_cast<double>(pod<float>()); }
  double f64() { return pod<double>(); }

  const std::string& path() const { return path_; }

 private:
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }

  std::string path_;
  std::ifstream in_;
};

// Shortest decimal string that parses back to the same double, so text
// artifacts stay both exact and readable (0.8 prints as "0.8").
inline std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detail

// ---------------------------------------------------------------- Gaussians

inline void write_gaussians(const std::string& path,
                            const std::vector<SemanticGaussian>& gaussians) {
  std::size_t n_classes = gaussians.empty() ? 0 : gaussians[0].logits.size();
  for (const auto& g : gaussians)
    if (static_cast<std::size_t>(g.logits.size()) != n_classes)
      throw std::invalid_argument("write_gaussians: mixed logit widths");
  detail::FileWriter w(path);
  w.magic("GOC1");
  w.u64(gaussians.size());
  w.u32(static_cast<std::uint32_t>(n_classes));
  for (const auto& g : gaussians) {
    for (int a = 0; a < 3; ++a) w.f32(g.mean[a]);
    for (int a = 0; a < 4; ++a) w.f32(g.rotation[a]);
    for (int a = 0; a < 3; ++a) w.f32(g.scale[a]);
    w.f32(g.opacity);
    for (Eigen::Index c = 0; c < g.logits.size(); ++c) w.f32(g.logits[c]);
  }
  w.finish();
}

inline std::vector<SemanticGaussian> read_gaussians(const std::string& path) {
  detail::FileReader r(path);
  r.expect_magic("GOC1");
  const std::uint64_t count = r.u64();
  const std::uint32_t n_classes = r.u32();
  std::vector<SemanticGaussian> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    // Fields are kept exactly as stored (no renormalization), so a write of
    // what was just read reproduces the file byte for byte. Consumers
    // normalize rotations at the point of use.
    SemanticGaussian g;
    for (int a = 0; a < 3; ++a) g.mean[a] = r.f32();
    for (int a = 0; a < 4; ++a) g.rotation[a] = r.f32();
    for (int a = 0; a < 3; ++a) g.scale[a] = r.f32();
    g.opacity = r.f32();
    g.logits.resize(n_classes);
    for (std::uint32_t c = 0; c < n_classes; ++c) g.logits[c] = r.f32();
    if (!g.mean.allFinite() || !g.rotation.allFinite() || !g.scale.allFinite() ||
        !std::isfinite(g.opacity) || !g.logits.allFinite())
      throw std::runtime_error(path + ": non-finite Gaussian field");
    if (g.opacity < 0.0 || g.opacity > 1.0)
      throw std::runtime_error(path + ": opacity outside [0, 1]");
    if (!((g.scale.array() > 0.0).all()) || !(g.rotation.norm() > 1e-9))
      throw std::runtime_error(path + ": degenerate scale or rotation");
    out.push_back(std::move(g));
  }
  return out;
}

// ------------------------------------------------------------- point clouds

inline void write_point_cloud(const std::string& path, const PointCloud& cloud) {
  detail::FileWriter w(path);
  w.magic("LPC1");
  w.u64(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) w.f32(cloud.positions[i][a]);
    w.f32(cloud.intensities[i]);
  }
  w.finish();
}

inline PointCloud read_point_cloud(const std::string& path) {
  detail::FileReader r(path);
  r.expect_magic("LPC1");
  const std::uint64_t count = r.u64();
  PointCloud cloud;
  cloud.positions.reserve(count);
  cloud.intensities.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = r.f32();
    cloud.positions.push_back(p);
    cloud.intensities.push_back(r.f32());
  }
  return cloud;
}

inline void write_point_cloud_csv(const std::string& path, const PointCloud& cloud) {
  std::string text = "x,y,z,intensity\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    text += detail::fmt_double(cloud.positions[i].x()) + ",";
    text += detail::fmt_double(cloud.positions[i].y()) + ",";
    text += detail::fmt_double(cloud.positions[i].z()) + ",";
    text += detail::fmt_double(cloud.intensities[i]) + "\n";
  }
  detail::write_text(path, text);
}

inline PointCloud read_point_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("x,y,z,intensity", 0) != 0)
    throw std::runtime_error(path + ": expected header x,y,z,intensity");
  PointCloud cloud;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    double v[4];
    const char* s = line.c_str();
    for (int k = 0; k < 4; ++k) {
      char* end = nullptr;
      v[k] = std::strtod(s, &end);
      if (end == s || (k < 3 && *end != ','))
        throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                 ": expected x,y,z,intensity");
      s = (k < 3) ? end + 1 : end;
    }
    cloud.positions.emplace_back(v[0], v[1], v[2]);
    cloud.intensities.push_back(v[3]);
  }
  return cloud;
}

// ------------------------------------------------------------------- grids

inline void write_grid(const std::string& path, const OccupancyGrid& grid) {
  grid.spec.validate();
  const std::size_t n = grid.spec.num_voxels();
  if (grid.is_labels()) {
    if (grid.labels.size() != n)
      throw std::invalid_argument("write_grid: label count does not match the lattice");
  } else if (grid.values.size() != n * grid.n_classes) {
    throw std::invalid_argument("write_grid: value count does not match the lattice");
  }
  detail::FileWriter w(path);
  w.magic("OGR1");
  const Vec3 hi = grid.spec.max_corner();
  for (int a = 0; a < 3; ++a) w.f64(grid.spec.origin[a]);
  for (int a = 0; a < 3; ++a) w.f64(hi[a]);
  for (int a = 0; a < 3; ++a) w.f64(grid.spec.resolution[a]);
  for (int a = 0; a < 3; ++a) w.u64(static_cast<std::uint64_t>(grid.spec.counts[a]));
  w.u32(static_cast<std::uint32_t>(grid.n_classes));
  w.u8(grid.is_labels() ? 1 : 0);
  if (grid.is_labels()) {
    for (std::uint16_t label : grid.labels) w.u16(label);
  } else {
    for (double v : grid.values) w.f32(v);
  }
  w.finish();
}

inline OccupancyGrid read_grid(const std::string& path) {
  detail::FileReader r(path);
  r.expect_magic("OGR1");
  GridSpec spec;
  Vec3 hi;
  for (int a = 0; a < 3; ++a) spec.origin[a] = r.f64();
  for (int a = 0; a < 3; ++a) hi[a] = r.f64();
  for (int a = 0; a < 3; ++a) spec.resolution[a] = r.f64();
  for (int a = 0; a < 3; ++a) spec.counts[a] = static_cast<std::int64_t>(r.u64());
  spec.validate();
  if (!hi.isApprox(spec.max_corner(), 1e-9))
    throw std::runtime_error(path + ": extent disagrees with resolution * counts");
  const std::uint32_t n_classes = r.u32();
  const std::uint8_t mode = r.u8();
  const std::size_t n = spec.num_voxels();
  OccupancyGrid grid;
  grid.spec = spec;
  grid.n_classes = n_classes;
  if (mode == 1) {
    grid.labels.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
      grid.labels[v] = r.u16();
      if (grid.labels[v] >= n_classes)
        throw std::runtime_error(path + ": label out of class range");
    }
  } else if (mode == 0) {
    grid.values.resize(n * n_classes);
    for (double& v : grid.values) v = r.f32();
  } else {
    throw std::runtime_error(path + ": unknown grid mode flag");
  }
  return grid;
}

/// Visualization dump: one "x y z class" line per non-empty voxel center.
/// Logit grids are collapsed by argmax first.
inline void write_grid_ascii(const std::string& path, const OccupancyGrid& grid,
                             std::size_t empty_index = 0) {
  const OccupancyGrid labels = grid.argmax_labels();
  std::string text;
  for (std::size_t v = 0; v < labels.spec.num_voxels(); ++v) {
    if (labels.labels[v] == empty_index) continue;
    const auto [ix, iy, iz] = labels.spec.unlinear(v);
    const Vec3 p = labels.spec.center(ix, iy, iz);
    text += detail::fmt_double(p.x()) + " " + detail::fmt_double(p.y()) + " " +
            detail::fmt_double(p.z()) + " " + std::to_string(labels.labels[v]) + "\n";
  }
  detail::write_text(path, text);
}

// --------------------------------------------------------------- depth maps

inline void write_depth_map(const std::string& path, const SparseDepthMap& dm) {
  const std::size_t n = static_cast<std::size_t>(dm.width) * dm.height;
  if (dm.depth.size() != n)
    throw std::invalid_argument("write_depth_map: pixel count mismatch");
  detail::FileWriter w(path);
  w.magic("SDM1");
  w.u32(static_cast<std::uint32_t>(dm.scale));
  w.u32(static_cast<std::uint32_t>(dm.width));
  w.u32(static_cast<std::uint32_t>(dm.height));
  w.f64(dm.d_max);
  std::size_t i = 0;
  while (i < n) {
    std::size_t missing = 0;
    while (i + missing < n && dm.depth[i + missing] == 0.0) ++missing;
    i += missing;
    std::size_t run = 0;
    while (i + run < n && dm.depth[i + run] != 0.0) ++run;
    w.u32(static_cast<std::uint32_t>(missing));
    w.u32(static_cast<std::uint32_t>(run));
    for (std::size_t k = 0; k < run; ++k) w.f32(dm.depth[i + k]);
    i += run;
  }
  w.finish();
}

inline SparseDepthMap read_depth_map(const std::string& path) {
  detail::FileReader r(path);
  r.expect_magic("SDM1");
  SparseDepthMap dm;
  dm.scale = static_cast<int>(r.u32());
  dm.width = static_cast<int>(r.u32());
  dm.height = static_cast<int>(r.u32());
  dm.d_max = r.f64();
  const std::size_t n = static_cast<std::size_t>(dm.width) * dm.height;
  dm.depth.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    const std::uint32_t missing = r.u32();
    const std::uint32_t run = r.u32();
    if (i + missing + run > n)
      throw std::runtime_error(path + ": run-length data overflows the image");
    i += missing;
    for (std::uint32_t k = 0; k < run; ++k) dm.depth[i + k] = r.f32();
    i += run;
  }
  return dm;
}

// ------------------------------------------------------------ block weights

namespace detail {

inline void write_mat(FileWriter& w, const MatX& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(m(i, j));
}

inline void write_vec(FileWriter& w, const VecX& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  w.u32(1);
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f32(v[i]);
}

inline MatX read_mat(FileReader& r) {
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  MatX m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f32();
  return m;
}

inline VecX read_vec(FileReader& r) {
  const MatX m = read_mat(r);
  if (m.cols() != 1) throw std::runtime_error(r.path() + ": expected a column vector");
  return m.col(0);
}

}  // namespace detail

inline void write_block_weights(const std::string& path, const AttentionDims& dims,
                                const BlockWeights& bw) {
  bw.validate(dims);
  detail::FileWriter w(path);
  w.magic("GW3D");
  for (int d : {dims.m, dims.m_c, dims.hidden, dims.n_classes, dims.n_cameras,
                dims.n_scales, dims.n_r1, dims.n_r2})
    w.u32(static_cast<std::uint32_t>(d));
  w.f64(bw.conv_cell_size);
  for (const MatX& m : bw.conv) detail::write_mat(w, m);
  detail::write_mat(w, bw.offset1_w);
  detail::write_vec(w, bw.offset1_b);
  detail::write_mat(w, bw.offset2_w);
  detail::write_vec(w, bw.offset2_b);
  detail::write_mat(w, bw.weight_w);
  detail::write_vec(w, bw.weight_b);
  detail::write_mat(w, bw.value_w);
  detail::write_mat(w, bw.mlp_w1);
  detail::write_vec(w, bw.mlp_b1);
  detail::write_mat(w, bw.mlp_w2);
  detail::write_vec(w, bw.mlp_b2);
  w.finish();
}

inline std::pair<AttentionDims, BlockWeights> read_block_weights(const std::string& path) {
  detail::FileReader r(path);
  r.expect_magic("GW3D");
  AttentionDims dims;
  dims.m = static_cast<int>(r.u32());
  dims.m_c = static_cast<int>(r.u32());
  dims.hidden = static_cast<int>(r.u32());
  dims.n_classes = static_cast<int>(r.u32());
  dims.n_cameras = static_cast<int>(r.u32());
  dims.n_scales = static_cast<int>(r.u32());
  dims.n_r1 = static_cast<int>(r.u32());
  dims.n_r2 = static_cast<int>(r.u32());
  BlockWeights bw;
  bw.conv_cell_size = r.f64();
  bw.conv.resize(27);
  for (MatX& m : bw.conv) m = detail::read_mat(r);
  bw.offset1_w = detail::read_mat(r);
  bw.offset1_b = detail::read_vec(r);
  bw.offset2_w = detail::read_mat(r);
  bw.offset2_b = detail::read_vec(r);
  bw.weight_w = detail::read_mat(r);
  bw.weight_b = detail::read_vec(r);
  bw.value_w = detail::read_mat(r);
  bw.mlp_w1 = detail::read_mat(r);
  bw.mlp_b1 = detail::read_vec(r);
  bw.mlp_w2 = detail::read_mat(r);
  bw.mlp_b2 = detail::read_vec(r);
  try {
    bw.validate(dims);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return {dims, bw};
}

// ---------------------------------------------------------- feature pyramids

inline void write_pyramid(const std::string& path, const std::vector<FeatureMap>& pyramid) {
  detail::FileWriter w(path);
  w.magic("FPY1");
  w.u32(static_cast<std::uint32_t>(pyramid.size()));
  for (const FeatureMap& f : pyramid) {
    w.u32(static_cast<std::uint32_t>(f.width));
    w.u32(static_cast<std::uint32_t>(f.height));
    w.u32(static_cast<std::uint32_t>(f.channels));
    for (double v : f.data) w.f32(v);
  }
  w.finish();
}

inline std::vector<FeatureMap> read_pyramid(const std::string& path) {
  detail::FileReader r(path);
  r.expect_magic("FPY1");
  const std::uint32_t n_scales = r.u32();
  std::vector<FeatureMap> pyramid;
  pyramid.reserve(n_scales);
  for (std::uint32_t k = 0; k < n_scales; ++k) {
    const int w = static_cast<int>(r.u32());
    const int h = static_cast<int>(r.u32());
    const int c = static_cast<int>(r.u32());
    if (w < 1 || h < 1 || c < 1)
      throw std::runtime_error(path + ": degenerate pyramid scale");
    FeatureMap f = FeatureMap::zeros(w, h, c);
    for (double& v : f.data) v = r.f32();
    pyramid.push_back(std::move(f));
  }
  return pyramid;
}

// --------------------------------------------------------------------- PLY

/// Distinct display colors; class c maps to entry c mod 10. Entry 0 (the
/// conventional empty class) is black and normally never exported.
inline std::array<std::uint8_t, 3> class_color(std::size_t cls) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 10> kPalette = {{
      {0, 0, 0},
      {228, 26, 28},
      {55, 126, 184},
      {77, 175, 74},
      {152, 78, 163},
      {255, 127, 0},
      {255, 255, 51},
      {166, 86, 40},
      {247, 129, 191},
      {153, 153, 153},
  }};
  return kPalette[cls % kPalette.size()];
}

namespace detail {

inline std::string ply_header(std::size_t n_vertices) {
  std::string h = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(n_vertices);
  h +=
      "\nproperty float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "property uchar class\nend_header\n";
  return h;
}

inline void ply_vertex(std::string& text, const Vec3& p, std::size_t cls) {
  const auto [rr, gg, bb] = class_color(cls);
  text += detail::fmt_double(p.x()) + " " + detail::fmt_double(p.y()) + " " +
          detail::fmt_double(p.z()) + " " + std::to_string(rr) + " " +
          std::to_string(gg) + " " + std::to_string(bb) + " " +
          std::to_string(cls % 256) + "\n";
}

}  // namespace detail

/// One vertex per Gaussian at its mean, colored by argmax class.
inline void write_ply_gaussians(const std::string& path,
                                const std::vector<SemanticGaussian>& gaussians) {
  std::string text = detail::ply_header(gaussians.size());
  for (const auto& g : gaussians) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < g.logits.size(); ++c)
      if (g.logits[c] > g.logits[best]) best = c;
    detail::ply_vertex(text, g.mean, static_cast<std::size_t>(best));
  }
  detail::write_text(path, text);
}

/// One vertex per non-empty voxel at its center, colored by class.
inline void write_ply_grid(const std::string& path, const OccupancyGrid& grid,
                           std::size_t empty_index = 0) {
  const OccupancyGrid labels = grid.argmax_labels();
  std::vector<std::pair<Vec3, std::size_t>> vertices;
  for (std::size_t v = 0; v < labels.spec.num_voxels(); ++v) {
    if (labels.labels[v] == empty_index) continue;
    const auto [ix, iy, iz] = labels.spec.unlinear(v);
    vertices.emplace_back(labels.spec.center(ix, iy, iz), labels.labels[v]);
  }
  std::string text = detail::ply_header(vertices.size());
  for (const auto& [p, cls] : vertices) detail::ply_vertex(text, p, cls);
  detail::write_text(path, text);
}

// -------------------------------------------------------------------- CSVs

/// Per-class IoU rows followed by one summary row with the occupied-vs-empty
/// IoU and the mean over non-empty classes.
inline void write_metrics_csv(const std::string& path, const MetricsResult& m) {
  std::string text = "class,iou\n";
  for (std::size_t c = 0; c < m.per_class.size(); ++c)
    text += std::to_string(c) + "," + detail::fmt_double(m.per_class[c]) + "\n";
  text += "summary," + detail::fmt_double(m.geometry_iou) + "," +
          detail::fmt_double(m.miou) + "\n";
  detail::write_text(path, text);
}

/// One optimization step of the fitting trace. IoU columns hold NaN on
/// iterations without an evaluation pass.
struct TraceRow {
  std::size_t iteration = 0;
  double ce = 0.0;
  double lovasz = 0.0;
  double total = 0.0;
  double iou = std::numeric_limits<double>::quiet_NaN();
  double miou = std::numeric_limits<double>::quiet_NaN();
};

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::string text = "iteration,ce,lovasz,total,iou,miou\n";
  for (const TraceRow& r : rows) {
    text += std::to_string(r.iteration) + "," + detail::fmt_double(r.ce) + "," +
            detail::fmt_double(r.lovasz) + "," + detail::fmt_double(r.total) + "," +
            detail::fmt_double(r.iou) + "," + detail::fmt_double(r.miou) + "\n";
  }
  detail::write_text(path, text);
}

}  // namespace gocc

#endif
