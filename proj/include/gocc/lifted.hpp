#ifndef GOCC_LIFTED_HPP
#define GOCC_LIFTED_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gocc/lidar.hpp"

namespace gocc {

/// Dense per-pixel feature image, channel-fastest storage.
struct FeatureMap {
  int width = 0, height = 0, channels = 0;
  std::vector<double> data;

  static FeatureMap zeros(int w, int h, int c) {
    FeatureMap f;
    f.width = w;
    f.height = h;
    f.channels = c;
    f.data.assign(static_cast<std::size_t>(w) * h * c, 0.0);
    return f;
  }

  double* at(int u, int v) {
    return data.data() + (static_cast<std::size_t>(v) * width + u) * channels;
  }
  const double* at(int u, int v) const {
    return data.data() + (static_cast<std::size_t>(v) * width + u) * channels;
  }
};

/// Depth discretization: D+1 strictly increasing edges spanning (0, d_max].
/// Bin k covers (edges[k], edges[k+1]]; the continuous bin coordinate puts
/// integer k at the center of bin k and extrapolates linearly past the first
/// and last centers.
struct DepthBins {
  std::vector<double> edges;

  static DepthBins linear(int d, double d_max) {
    if (d < 2 || !(d_max > 0))
      throw std::invalid_argument("DepthBins: need >= 2 bins and positive d_max");
    DepthBins b;
    b.edges.resize(d + 1);
    for (int k = 0; k <= d; ++k) b.edges[k] = d_max * double(k) / double(d);
    return b;
  }

  void validate() const {
    if (edges.size() < 3 || edges.front() != 0.0)
      throw std::invalid_argument("DepthBins: need >= 2 bins starting at 0");
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (!(edges[i] > edges[i - 1]))
        throw std::invalid_argument("DepthBins: edges must increase strictly");
  }

  int count() const { return static_cast<int>(edges.size()) - 1; }
  double d_max() const { return edges.back(); }
  double center(int k) const { return 0.5 * (edges[k] + edges[k + 1]); }

  int bin_of(double depth) const {
    auto it = std::lower_bound(edges.begin() + 1, edges.end(), depth);
    long k = (it - edges.begin()) - 1;
    return static_cast<int>(std::clamp<long>(k, 0, count() - 1));
  }

  double to_bin_coord(double depth) const {
    const int d = count();
    int k = bin_of(depth);
    if (depth <= center(k)) k -= 1;           // below this center: previous segment
    k = std::clamp(k, 0, d - 2);
    return k + (depth - center(k)) / (center(k + 1) - center(k));
  }

  // Slope of the bin coordinate in 1/meters at the given depth.
  double bin_coord_slope(double depth) const {
    const int d = count();
    int k = bin_of(depth);
    if (depth <= center(k)) k -= 1;
    k = std::clamp(k, 0, d - 2);
    return 1.0 / (center(k + 1) - center(k));
  }
};

/// Per-pixel categorical distribution over depth bins; rows sum to 1.
struct DepthDistributionMap {
  int width = 0, height = 0;
  DepthBins bins;
  std::vector<double> data;  // (v * W + u) * D + k

  static DepthDistributionMap uniform(int w, int h, const DepthBins& bins) {
    bins.validate();
    DepthDistributionMap m;
    m.width = w;
    m.height = h;
    m.bins = bins;
    m.data.assign(static_cast<std::size_t>(w) * h * bins.count(),
                  1.0 / bins.count());
    return m;
  }

  double* at(int u, int v) {
    return data.data() + (static_cast<std::size_t>(v) * width + u) * bins.count();
  }
  const double* at(int u, int v) const {
    return data.data() + (static_cast<std::size_t>(v) * width + u) * bins.count();
  }
};

/// Lifts a sparse depth map to per-pixel depth distributions: one-hot at the
/// bin holding the measured depth, uniform where no measurement lands (or the
/// measurement exceeds the bin range).
inline DepthDistributionMap build_depth_distribution(const SparseDepthMap& dm,
                                                     const DepthBins& bins) {
  bins.validate();
  DepthDistributionMap out = DepthDistributionMap::uniform(dm.width, dm.height, bins);
  const int d = bins.count();
  for (int v = 0; v < dm.height; ++v)
    for (int u = 0; u < dm.width; ++u) {
      auto depth = dm.depth_at(u, v);
      if (!depth || *depth > bins.d_max()) continue;
      double* row = out.at(u, v);
      std::fill(row, row + d, 0.0);
      row[bins.bin_of(*depth)] = 1.0;
    }
  return out;
}

/// Projects a reference-frame point to continuous pixel coordinates and
/// camera depth at a pyramid scale: (u, v, depth_meters). Absent when the
/// point sits at or behind the near plane or projects off the image.
inline std::optional<Vec3> project_reference(const Vec3& point, const CameraModel& cam,
                                             int scale, double z_near = 0.1) {
  cam.validate();
  const CameraModel c = cam.scaled(scale);
  Vec3 pc = c.rot * point + c.trans;
  const double z = pc.z();
  if (!(z > z_near)) return std::nullopt;
  const double u = c.fx * pc.x() / z + c.cx;
  const double v = c.fy * pc.y() / z + c.cy;
  if (u < 0.0 || u >= c.width || v < 0.0 || v >= c.height) return std::nullopt;
  return Vec3(u, v, z);
}

namespace detail {

// Shared bilinear setup: corner indices and weights for one continuous
// coordinate on a zero-padded lattice of the given size.
struct Lin {
  int i0;
  double f;
  bool lo_ok, hi_ok;
  Lin(double x, int n) {
    double fl = std::floor(x);
    i0 = static_cast<int>(fl);
    f = x - fl;
    lo_ok = i0 >= 0 && i0 < n;
    hi_ok = i0 + 1 >= 0 && i0 + 1 < n;
  }
};

}  // namespace detail

/// Depth-weighted bilinear sampling at continuous pixel (u, v) and continuous
/// depth-bin coordinate t. Equivalent to trilinear interpolation over the
/// outer-product volume fd (x) fc without ever materializing it: each of the
/// four pixel corners contributes bilinear_weight * (linear mix of its two
/// depth-bin masses) * its feature vector. Out-of-range corners and bins
/// contribute zero.
inline VecX sample_3d_bin(const FeatureMap& fc, const DepthDistributionMap& fd,
                          double u, double v, double t) {
  if (fc.width != fd.width || fc.height != fd.height)
    throw std::invalid_argument("sample_3d: feature/depth map shape mismatch");
  const int d = fd.bins.count();
  detail::Lin lu(u, fc.width), lv(v, fc.height), lt(t, d);
  VecX out = VecX::Zero(fc.channels);
  for (int dv = 0; dv <= 1; ++dv) {
    if (!(dv ? lv.hi_ok : lv.lo_ok)) continue;
    const int py = lv.i0 + dv;
    const double wv = dv ? lv.f : 1.0 - lv.f;
    for (int du = 0; du <= 1; ++du) {
      if (!(du ? lu.hi_ok : lu.lo_ok)) continue;
      const int px = lu.i0 + du;
      const double wu = du ? lu.f : 1.0 - lu.f;
      const double* bins_row = fd.at(px, py);
      double depth_mix = 0.0;
      if (lt.lo_ok) depth_mix += (1.0 - lt.f) * bins_row[lt.i0];
      if (lt.hi_ok) depth_mix += lt.f * bins_row[lt.i0 + 1];
      const double w = wu * wv * depth_mix;
      if (w == 0.0) continue;
      const double* feat = fc.at(px, py);
      for (int c = 0; c < fc.channels; ++c) out[c] += w * feat[c];
    }
  }
  return out;
}

/// Meters entry point: converts depth to the continuous bin coordinate.
inline VecX sample_3d(const FeatureMap& fc, const DepthDistributionMap& fd,
                      double u, double v, double depth_meters) {
  return sample_3d_bin(fc, fd, u, v, fd.bins.to_bin_coord(depth_meters));
}

/// Jacobian of sample_3d with respect to (u, v, depth_meters); channels x 3.
/// Piecewise-constant cell derivatives; on a lattice plane the containing
/// cell by floor convention decides.
inline MatX sample_3d_grad(const FeatureMap& fc, const DepthDistributionMap& fd,
                           double u, double v, double depth_meters) {
  if (fc.width != fd.width || fc.height != fd.height)
    throw std::invalid_argument("sample_3d_grad: feature/depth map shape mismatch");
  const int d = fd.bins.count();
  const double t = fd.bins.to_bin_coord(depth_meters);
  detail::Lin lu(u, fc.width), lv(v, fc.height), lt(t, d);
  MatX jac = MatX::Zero(fc.channels, 3);
  for (int dv = 0; dv <= 1; ++dv) {
    if (!(dv ? lv.hi_ok : lv.lo_ok)) continue;
    const int py = lv.i0 + dv;
    const double wv = dv ? lv.f : 1.0 - lv.f;
    const double gv = dv ? 1.0 : -1.0;
    for (int du = 0; du <= 1; ++du) {
      if (!(du ? lu.hi_ok : lu.lo_ok)) continue;
      const int px = lu.i0 + du;
      const double wu = du ? lu.f : 1.0 - lu.f;
      const double gu = du ? 1.0 : -1.0;
      const double* bins_row = fd.at(px, py);
      double depth_mix = 0.0, depth_diff = 0.0;
      if (lt.lo_ok) {
        depth_mix += (1.0 - lt.f) * bins_row[lt.i0];
        depth_diff -= bins_row[lt.i0];
      }
      if (lt.hi_ok) {
        depth_mix += lt.f * bins_row[lt.i0 + 1];
        depth_diff += bins_row[lt.i0 + 1];
      }
      const double* feat = fc.at(px, py);
      const double wu_wv = wu * wv;
      for (int c = 0; c < fc.channels; ++c) {
        jac(c, 0) += gu * wv * depth_mix * feat[c];
        jac(c, 1) += gv * wu * depth_mix * feat[c];
        jac(c, 2) += wu_wv * depth_diff * feat[c];
      }
    }
  }
  jac.col(2) *= fd.bins.bin_coord_slope(depth_meters);
  return jac;
}

}  // namespace gocc

#endif
