#ifndef GOCC_SCENE_HPP
#define GOCC_SCENE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gocc/grid.hpp"
#include "gocc/lidar.hpp"
#include "gocc/lifted.hpp"
#include "gocc/parallel.hpp"
#include "gocc/rng.hpp"

namespace gocc {

/// Ray-march tolerance: returned hit points sit within this distance of a
/// primitive surface, on the inside of the solid.
constexpr double kMarchTolerance = 1e-3;

enum class ShapeKind { kBox, kSphere, kGround };

/// One solid building block of a synthetic world. Boxes yaw about +z;
/// spheres ignore yaw and half_size; ground planes fill the half-space
/// z <= center.z(). Class 0 is reserved for empty space.
struct Primitive {
  ShapeKind kind = ShapeKind::kBox;
  Vec3 center = Vec3::Zero();
  double yaw = 0.0;
  Vec3 half_size = Vec3::Ones();
  double radius = 1.0;
  std::uint16_t cls = 1;
};

inline Primitive make_box(const Vec3& center, const Vec3& half_size, double yaw,
                          std::uint16_t cls) {
  Primitive p;
  p.kind = ShapeKind::kBox;
  p.center = center;
  p.half_size = half_size;
  p.yaw = yaw;
  p.cls = cls;
  return p;
}

inline Primitive make_sphere(const Vec3& center, double radius, std::uint16_t cls) {
  Primitive p;
  p.kind = ShapeKind::kSphere;
  p.center = center;
  p.radius = radius;
  p.cls = cls;
  return p;
}

inline Primitive make_ground(double z_top, std::uint16_t cls) {
  Primitive p;
  p.kind = ShapeKind::kGround;
  p.center = Vec3(0.0, 0.0, z_top);
  p.cls = cls;
  return p;
}

/// Signed distance to the primitive surface, negative inside.
inline double primitive_sdf(const Primitive& prim, const Vec3& p) {
  switch (prim.kind) {
    case ShapeKind::kSphere:
      return (p - prim.center).norm() - prim.radius;
    case ShapeKind::kGround:
      return p.z() - prim.center.z();
    case ShapeKind::kBox: {
      const double c = std::cos(prim.yaw), s = std::sin(prim.yaw);
      const double dx = p.x() - prim.center.x();
      const double dy = p.y() - prim.center.y();
      const Vec3 local(c * dx + s * dy, -s * dx + c * dy, p.z() - prim.center.z());
      const Vec3 q = local.cwiseAbs() - prim.half_size;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
  }
  return std::numeric_limits<double>::infinity();
}

inline double scene_sdf(const std::vector<Primitive>& prims, const Vec3& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& prim : prims) d = std::min(d, primitive_sdf(prim, p));
  return d;
}

struct RayHit {
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  std::size_t prim = 0;
};

namespace detail {

// Primitive whose surface is closest to p; later entries win exact ties,
// matching the rasterization overlap rule.
inline std::size_t nearest_primitive(const std::vector<Primitive>& prims, const Vec3& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const double d = std::abs(primitive_sdf(prims[i], p));
    if (d <= best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// Sphere-traces one ray. Steps by the scene distance (floored at the march
/// tolerance) until the ray crosses into a solid, then bisects the bracket
/// so the returned point lies just inside, within kMarchTolerance of the
/// surface. `dir` must be unit length.
inline std::optional<RayHit> trace_ray(const std::vector<Primitive>& prims,
                                       const Vec3& origin, const Vec3& dir,
                                       double max_range) {
  if (prims.empty()) return std::nullopt;
  double t_lo = 0.0;
  double d = scene_sdf(prims, origin);
  if (d <= 0.0) return RayHit{0.0, origin, detail::nearest_primitive(prims, origin)};
  while (t_lo < max_range) {
    double t_hi = t_lo + std::max(d, kMarchTolerance);
    const double d_hi = scene_sdf(prims, origin + t_hi * dir);
    if (d_hi <= 0.0) {
      while (t_hi - t_lo > 0.5 * kMarchTolerance) {
        const double mid = 0.5 * (t_lo + t_hi);
        if (scene_sdf(prims, origin + mid * dir) <= 0.0)
          t_hi = mid;
        else
          t_lo = mid;
      }
      const Vec3 hit = origin + t_hi * dir;
      return RayHit{t_hi, hit, detail::nearest_primitive(prims, hit)};
    }
    t_lo = t_hi;
    d = d_hi;
  }
  return std::nullopt;
}

/// Rigid sensor-to-world pose active while one sweep is captured.
struct SensorPose {
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();
  double timestamp = 0.0;
};

/// Spinning scanner: `beams` elevation rows spread evenly over
/// [elevation_min, elevation_max] (a single beam sits at the minimum), each
/// swept through a full turn in `azimuth_steps` equal headings.
struct LidarRig {
  int beams = 16;
  int azimuth_steps = 180;
  double elevation_min = -0.45;  // radians
  double elevation_max = 0.10;
  double max_range = 100.0;
  std::vector<SensorPose> poses;
};

inline GridSpec scene_default_grid() {
  GridSpec g;
  g.origin = Vec3(-25.0, -25.0, -2.5);
  g.resolution = Vec3(0.5, 0.5, 0.5);
  g.counts = {100, 100, 8};
  return g;
}

/// Complete description of a synthetic world: the voxel lattice, the solids
/// that fill it, the camera rig, the scanner, and the noise seed. Label 0 is
/// empty space; primitive classes run from 1 to n_classes - 1.
struct SceneSpec {
  GridSpec grid = scene_default_grid();
  std::size_t n_classes = 4;
  std::vector<Primitive> primitives;
  std::vector<CameraModel> rig;
  LidarRig lidar;
  std::uint64_t rng_seed = 0;
};

inline void validate_scene(const SceneSpec& spec) {
  spec.grid.validate();
  if (spec.n_classes < 2)
    throw std::invalid_argument(
        "SceneSpec: need the empty class plus at least one solid class");
  const Vec3 lo = spec.grid.origin;
  const Vec3 hi = spec.grid.max_corner();
  for (const auto& prim : spec.primitives) {
    if (prim.cls == 0 || prim.cls >= spec.n_classes)
      throw std::invalid_argument("SceneSpec: primitive class out of range");
    if (prim.kind == ShapeKind::kGround) {
      if (prim.center.z() < lo.z() || prim.center.z() > hi.z())
        throw std::invalid_argument("SceneSpec: ground plane top outside the grid");
      continue;
    }
    Vec3 reach;
    if (prim.kind == ShapeKind::kBox) {
      if (!(prim.half_size.minCoeff() > 0.0))
        throw std::invalid_argument("SceneSpec: box half sizes must be positive");
      const double c = std::abs(std::cos(prim.yaw));
      const double s = std::abs(std::sin(prim.yaw));
      reach = Vec3(c * prim.half_size.x() + s * prim.half_size.y(),
                   s * prim.half_size.x() + c * prim.half_size.y(),
                   prim.half_size.z());
    } else {
      if (!(prim.radius > 0.0))
        throw std::invalid_argument("SceneSpec: sphere radius must be positive");
      reach = Vec3::Constant(prim.radius);
    }
    for (int a = 0; a < 3; ++a)
      if (prim.center[a] - reach[a] < lo[a] || prim.center[a] + reach[a] > hi[a])
        throw std::invalid_argument("SceneSpec: primitive pokes outside the grid");
  }
}

/// Point-samples every voxel center; the last listed primitive containing a
/// center claims it, otherwise the voxel stays empty (label 0).
inline OccupancyGrid rasterize_gt(const SceneSpec& spec) {
  validate_scene(spec);
  OccupancyGrid gt = OccupancyGrid::empty_labels(spec.grid, spec.n_classes);
  const std::size_t n = spec.grid.num_voxels();
  for (std::size_t v = 0; v < n; ++v) {
    const auto [ix, iy, iz] = spec.grid.unlinear(v);
    const Vec3 p = spec.grid.center(ix, iy, iz);
    std::uint16_t label = 0;
    for (const auto& prim : spec.primitives)
      if (primitive_sdf(prim, p) <= 0.0) label = prim.cls;
    gt.labels[v] = label;
  }
  return gt;
}

/// Captures one sweep per rig pose. Points come back in the sensor frame
/// with the pose attached, so aggregate_sweeps reproduces the world-frame
/// hits. Intensity is 0.1 + 0.15 * class plus Gaussian noise of sigma 0.01
/// drawn from the scene seed; rays trace in parallel but noise is applied
/// serially, so the thread count never changes the artifact.
inline std::vector<LidarSweep> simulate_lidar(const SceneSpec& spec, int threads = 1) {
  validate_scene(spec);
  if (spec.lidar.beams < 1 || spec.lidar.azimuth_steps < 1)
    throw std::invalid_argument("simulate_lidar: need at least one beam and azimuth step");
  if (!(spec.lidar.max_range > 0.0))
    throw std::invalid_argument("simulate_lidar: max_range must be positive");
  if (spec.lidar.elevation_min > spec.lidar.elevation_max)
    throw std::invalid_argument("simulate_lidar: elevation range is inverted");

  constexpr double kTwoPi = 6.28318530717958647692528676656;
  const int nb = spec.lidar.beams;
  const int na = spec.lidar.azimuth_steps;
  const double e0 = spec.lidar.elevation_min;
  const double de = nb > 1 ? (spec.lidar.elevation_max - e0) / (nb - 1) : 0.0;

  RngSequence rng(spec.rng_seed);
  std::vector<LidarSweep> sweeps;
  sweeps.reserve(spec.lidar.poses.size());
  for (const SensorPose& pose : spec.lidar.poses) {
    const std::size_t rays = static_cast<std::size_t>(nb) * static_cast<std::size_t>(na);
    std::vector<std::optional<RayHit>> hits(rays);
    std::vector<Vec3> dirs(rays);
    parallel_for(0, rays, threads, [&](std::size_t lo, std::size_t hi, int) {
      for (std::size_t r = lo; r < hi; ++r) {
        const double elev = e0 + de * static_cast<double>(r / na);
        const double azim = kTwoPi * static_cast<double>(r % na) / na;
        const Vec3 dir_s(std::cos(elev) * std::cos(azim),
                         std::cos(elev) * std::sin(azim), std::sin(elev));
        dirs[r] = dir_s;
        hits[r] = trace_ray(spec.primitives, pose.trans, pose.rot * dir_s,
                            spec.lidar.max_range);
      }
    });

    LidarSweep sweep;
    sweep.rot = pose.rot;
    sweep.trans = pose.trans;
    sweep.timestamp = pose.timestamp;
    for (std::size_t r = 0; r < rays; ++r) {
      if (!hits[r]) continue;
      LidarPoint pt;
      pt.position = hits[r]->t * dirs[r];
      const double base = 0.1 + 0.15 * static_cast<double>(spec.primitives[hits[r]->prim].cls);
      pt.intensity = base + 0.01 * rng.normal();
      sweep.points.push_back(pt);
    }
    sweeps.push_back(std::move(sweep));
  }
  return sweeps;
}

/// Fixed class-feature dictionary: row c is the standard basis vector e_c,
/// so class directions are exactly orthonormal and a linear readout can
/// separate them.
inline MatX class_codebook(std::size_t n_classes, int channels) {
  if (channels < static_cast<int>(n_classes))
    throw std::invalid_argument("class_codebook: need at least one channel per class");
  MatX cb = MatX::Zero(static_cast<Eigen::Index>(n_classes), channels);
  for (std::size_t c = 0; c < n_classes; ++c)
    cb(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = 1.0;
  return cb;
}

/// Halves each spatial dimension (floor, minimum 1) by averaging 2x2
/// windows; windows overhanging the input average whatever pixels exist.
inline FeatureMap average_pool_half(const FeatureMap& in) {
  FeatureMap out =
      FeatureMap::zeros(std::max(1, in.width / 2), std::max(1, in.height / 2), in.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double* o = out.at(x, y);
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int u = 2 * x + dx, v = 2 * y + dy;
          if (u >= in.width || v >= in.height) continue;
          const double* src = in.at(u, v);
          for (int c = 0; c < in.channels; ++c) o[c] += src[c];
          ++n;
        }
      }
      for (int c = 0; c < in.channels; ++c) o[c] /= static_cast<double>(n);
    }
  }
  return out;
}

/// Renders the class codebook into a camera image by tracing one ray per
/// pixel center (sky pixels stay zero), then 2x average-pools down to the
/// requested number of scales.
inline std::vector<FeatureMap> render_feature_pyramid(const SceneSpec& spec,
                                                      const CameraModel& cam,
                                                      int channels, int n_scales,
                                                      double max_range = 100.0,
                                                      int threads = 1) {
  validate_scene(spec);
  cam.validate();
  if (n_scales < 1)
    throw std::invalid_argument("render_feature_pyramid: need at least one scale");
  if (!(max_range > 0.0))
    throw std::invalid_argument("render_feature_pyramid: max_range must be positive");

  const MatX cb = class_codebook(spec.n_classes, channels);
  const Mat3 rot_t = cam.rot.transpose();
  const Vec3 center = -(rot_t * cam.trans);

  FeatureMap base = FeatureMap::zeros(cam.width, cam.height, channels);
  const std::size_t pixels =
      static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height);
  parallel_for(0, pixels, threads, [&](std::size_t lo, std::size_t hi, int) {
    for (std::size_t px = lo; px < hi; ++px) {
      const int u = static_cast<int>(px % static_cast<std::size_t>(cam.width));
      const int v = static_cast<int>(px / static_cast<std::size_t>(cam.width));
      Vec3 dir_cam((u + 0.5 - cam.cx) / cam.fx, (v + 0.5 - cam.cy) / cam.fy, 1.0);
      dir_cam.normalize();
      const auto hit = trace_ray(spec.primitives, center, rot_t * dir_cam, max_range);
      if (!hit) continue;
      double* dst = base.at(u, v);
      const auto cls = static_cast<Eigen::Index>(spec.primitives[hit->prim].cls);
      for (int c = 0; c < channels; ++c) dst[c] = cb(cls, c);
    }
  });

  std::vector<FeatureMap> pyramid;
  pyramid.reserve(static_cast<std::size_t>(n_scales));
  pyramid.push_back(std::move(base));
  for (int k = 1; k < n_scales; ++k) pyramid.push_back(average_pool_half(pyramid.back()));
  return pyramid;
}

}  // namespace gocc

#endif
