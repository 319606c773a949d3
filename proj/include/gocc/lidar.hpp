#ifndef GOCC_LIDAR_HPP
#define GOCC_LIDAR_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gocc/grid.hpp"

namespace gocc {

struct LidarPoint {
  Vec3 position;  // sensor frame
  double intensity = 0.0;
};

/// One sweep: points in the sensor frame plus the rigid sensor-to-reference
/// pose active when it was captured.
struct LidarSweep {
  std::vector<LidarPoint> points;
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();
  double timestamp = 0.0;
};

struct PointCloud {
  std::vector<Vec3> positions;  // reference frame
  std::vector<double> intensities;

  std::size_t size() const { return positions.size(); }
};

/// Concatenates all sweeps into one reference-frame cloud, applying each
/// sweep's pose. Sweep order, then point order within a sweep, is preserved.
inline PointCloud aggregate_sweeps(const std::vector<LidarSweep>& sweeps) {
  if (sweeps.empty())
    throw std::invalid_argument("aggregate_sweeps: empty sweep set");
  std::size_t total = 0;
  for (const auto& s : sweeps) total += s.points.size();
  PointCloud out;
  out.positions.reserve(total);
  out.intensities.reserve(total);
  for (const auto& s : sweeps) {
    for (const auto& p : s.points) {
      out.positions.emplace_back(s.rot * p.position + s.trans);
      out.intensities.push_back(p.intensity);
    }
  }
  return out;
}

/// Min-max rescales intensities to [0, 1] in place. A constant-intensity
/// cloud maps to 0.5 everywhere.
inline void normalize_intensity(PointCloud& cloud) {
  if (cloud.intensities.empty()) return;
  auto [lo_it, hi_it] =
      std::minmax_element(cloud.intensities.begin(), cloud.intensities.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi > lo) {
    const double inv = 1.0 / (hi - lo);
    for (double& v : cloud.intensities) v = (v - lo) * inv;
  } else {
    for (double& v : cloud.intensities) v = 0.5;
  }
}

struct VoxelFeature {
  std::array<std::int64_t, 3> idx;
  Vec3 mean_position;
  double mean_intensity;
  std::size_t count;
};

/// Sparse per-voxel point statistics, sorted by linear voxel index.
struct VoxelFeatureSet {
  GridSpec spec;
  std::vector<VoxelFeature> voxels;
};

namespace detail {

// Compensated accumulator; keeps voxel means stable under input reordering.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    double y = v - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

}  // namespace detail

/// Bins in-bounds points into voxels and reduces each occupied voxel to its
/// mean position and mean intensity. Points outside the lattice are dropped.
inline VoxelFeatureSet voxelize(const PointCloud& cloud, const GridSpec& spec) {
  spec.validate();
  struct Acc {
    detail::KahanSum x, y, z, inten;
    std::size_t n = 0;
  };
  std::map<std::size_t, Acc> bins;  // ordered: output is sorted by linear index
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto loc = spec.locate(cloud.positions[i]);
    if (!loc) continue;
    Acc& a = bins[spec.linear((*loc)[0], (*loc)[1], (*loc)[2])];
    a.x.add(cloud.positions[i][0]);
    a.y.add(cloud.positions[i][1]);
    a.z.add(cloud.positions[i][2]);
    a.inten.add(cloud.intensities[i]);
    a.n += 1;
  }
  VoxelFeatureSet out;
  out.spec = spec;
  out.voxels.reserve(bins.size());
  for (const auto& [linear, a] : bins) {
    VoxelFeature f;
    f.idx = spec.unlinear(linear);
    const double inv = 1.0 / static_cast<double>(a.n);
    f.mean_position = Vec3(a.x.sum * inv, a.y.sum * inv, a.z.sum * inv);
    f.mean_intensity = a.inten.sum * inv;
    f.count = a.n;
    out.voxels.push_back(f);
  }
  return out;
}

/// Pinhole camera. Points are taken to the camera frame as
/// x_cam = rot * x_ref + trans; +z looks forward.
struct CameraModel {
  int width = 0, height = 0;
  double fx = 1, fy = 1, cx = 0, cy = 0;
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();

  void validate() const {
    if (width < 1 || height < 1)
      throw std::invalid_argument("CameraModel: non-positive image size");
    if (!(fx > 0) || !(fy > 0))
      throw std::invalid_argument("CameraModel: non-positive focal length");
  }

  // Pyramid level k: intrinsics and image size halve per level (floor).
  CameraModel scaled(int scale) const {
    if (scale < 0) throw std::invalid_argument("CameraModel: negative scale");
    CameraModel c = *this;
    const double f = static_cast<double>(1 << scale);
    c.width = std::max(1, width >> scale);
    c.height = std::max(1, height >> scale);
    c.fx = fx / f;
    c.fy = fy / f;
    c.cx = cx / f;
    c.cy = cy / f;
    return c;
  }
};

/// Per-pixel nearest depth at one pyramid scale. Missing pixels hold the 0
/// sentinel; stored depths are in (0, d_max].
struct SparseDepthMap {
  int scale = 0;
  int width = 0, height = 0;
  double d_max = 0.0;
  std::vector<double> depth;  // row-major, 0 = missing

  bool has_depth(int u, int v) const { return depth[index(u, v)] > 0.0; }
  std::optional<double> depth_at(int u, int v) const {
    double d = depth[index(u, v)];
    if (d > 0.0) return d;
    return std::nullopt;
  }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(u);
  }
};

/// Z-buffers the cloud into a depth map at the given pyramid scale. A point
/// lands at pixel (floor(u), floor(v)) when its camera-frame z is positive
/// and at most d_max; collisions keep the smaller depth.
inline SparseDepthMap project_depth(const PointCloud& cloud, const CameraModel& cam,
                                    int scale, double d_max) {
  cam.validate();
  if (scale < 0) throw std::invalid_argument("project_depth: negative scale");
  if (!(d_max > 0)) throw std::invalid_argument("project_depth: d_max must be positive");
  const CameraModel c = cam.scaled(scale);
  SparseDepthMap dm;
  dm.scale = scale;
  dm.width = c.width;
  dm.height = c.height;
  dm.d_max = d_max;
  dm.depth.assign(static_cast<std::size_t>(c.width) * c.height, 0.0);
  for (const Vec3& p : cloud.positions) {
    Vec3 pc = c.rot * p + c.trans;
    const double z = pc.z();
    if (!(z > 0.0) || z > d_max) continue;
    int u = static_cast<int>(std::floor(c.fx * pc.x() / z + c.cx));
    int v = static_cast<int>(std::floor(c.fy * pc.y() / z + c.cy));
    if (u < 0 || u >= c.width || v < 0 || v >= c.height) continue;
    double& slot = dm.depth[dm.index(u, v)];
    if (slot == 0.0 || z < slot) slot = z;
  }
  return dm;
}

}  // namespace gocc

#endif
