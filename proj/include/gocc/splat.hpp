// Gaussian-to-voxel splatting: render a set of semantic Gaussians into an
// occupancy logit grid, plus the exact adjoint used by the fitting loop.
//
// Forward model per voxel center x:
//   out(x) = background on the empty channel
//          + sum_i opacity_i * exp(-0.5 * maha_i(x)^2) * logits_i
// The sum runs over the Gaussians a spatial hash returns for x, in ascending
// Gaussian index, so results are deterministic and (with an infinite cutoff)
// reproduce the brute-force double-loop bit for bit.
#ifndef GOCC_SPLAT_HPP
#define GOCC_SPLAT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "gocc/gaussian.hpp"
#include "gocc/grid.hpp"
#include "gocc/parallel.hpp"

namespace gocc {

// Uniform-cell spatial hash over Gaussian coverage balls. A Gaussian with
// scales s is registered in every cell its axis-aligned box of half-width
// (kappa + kappa_pad) * max(s) touches, so query(x) is a superset of the
// Gaussians whose kappa-ball contains x. Padding beyond the nominal cutoff
// is deliberate: a Gaussian just outside kappa standard deviations can still
// contribute a visible fraction of a faraway voxel's tiny total, and the
// extra margin pushes every skipped contribution below measurement noise.
// kappa = infinity degenerates to a dense index where every query returns
// all Gaussians.
struct SpatialIndex {
  struct CellKey {
    std::int64_t x = 0, y = 0, z = 0;
    bool operator==(const CellKey&) const = default;
  };
  struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const {
      auto mix = [](std::uint64_t h, std::uint64_t v) {
        return h ^ (v * 0x9E3779B97F4A7C15ull + 0x7F4A7C15ull + (h << 6) + (h >> 2));
      };
      std::uint64_t h = 0x243F6A8885A308D3ull;
      h = mix(h, static_cast<std::uint64_t>(k.x));
      h = mix(h, static_cast<std::uint64_t>(k.y));
      h = mix(h, static_cast<std::uint64_t>(k.z));
      return static_cast<std::size_t>(h);
    }
  };

  double cell_size = 1.0;
  bool dense = false;
  std::vector<std::size_t> all;  // dense fallback, ascending
  std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> cells;

  CellKey cell_of(const Vec3& p) const {
    return CellKey{static_cast<std::int64_t>(std::floor(p[0] / cell_size)),
                   static_cast<std::int64_t>(std::floor(p[1] / cell_size)),
                   static_cast<std::int64_t>(std::floor(p[2] / cell_size))};
  }

  // Candidate Gaussians for a point, ascending by index. The returned list is
  // shared cell-granular state; do not mutate.
  const std::vector<std::size_t>& query(const Vec3& x) const {
    if (dense) return all;
    auto it = cells.find(cell_of(x));
    if (it == cells.end()) return kEmpty;
    return it->second;
  }

  static inline const std::vector<std::size_t> kEmpty{};
};

// Builds the acceleration structure. cell_size <= 0 picks a size from the
// mean coverage radius; pass an explicit value when the caller knows the
// voxel pitch. Inserting in index order keeps every per-cell list ascending.
inline SpatialIndex build_index(const std::vector<SemanticGaussian>& gaussians,
                                double kappa, double kappa_pad = 3.5,
                                double cell_size = 0.0) {
  if (!(kappa > 0.0)) throw std::invalid_argument("build_index: kappa must be positive");
  if (!(kappa_pad >= 0.0) || !std::isfinite(kappa_pad))
    throw std::invalid_argument("build_index: kappa_pad must be finite and non-negative");

  SpatialIndex index;
  if (std::isinf(kappa)) {
    index.dense = true;
    index.all.resize(gaussians.size());
    for (std::size_t i = 0; i < gaussians.size(); ++i) index.all[i] = i;
    return index;
  }

  const double reach = kappa + kappa_pad;
  if (cell_size > 0.0) {
    index.cell_size = cell_size;
  } else {
    double mean_radius = 0.0;
    for (const auto& g : gaussians) mean_radius += reach * g.scale.maxCoeff();
    if (!gaussians.empty()) mean_radius /= static_cast<double>(gaussians.size());
    index.cell_size = std::max(1e-3, 2.0 * mean_radius);
  }

  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const auto& g = gaussians[i];
    const double rho = reach * g.scale.maxCoeff();
    SpatialIndex::CellKey lo = index.cell_of(g.mean - Vec3::Constant(rho));
    SpatialIndex::CellKey hi = index.cell_of(g.mean + Vec3::Constant(rho));
    for (std::int64_t cx = lo.x; cx <= hi.x; ++cx)
      for (std::int64_t cy = lo.y; cy <= hi.y; ++cy)
        for (std::int64_t cz = lo.z; cz <= hi.z; ++cz)
          index.cells[SpatialIndex::CellKey{cx, cy, cz}].push_back(i);
  }
  return index;
}

namespace detail {

inline void validate_splat_args(const std::vector<SemanticGaussian>& gaussians,
                                const GridSpec& spec, std::size_t n_classes) {
  spec.validate();
  if (n_classes == 0) throw std::invalid_argument("splat: n_classes must be positive");
  for (const auto& g : gaussians)
    if (static_cast<std::size_t>(g.logits.size()) != n_classes)
      throw std::invalid_argument("splat: Gaussian logit width does not match n_classes");
}

}  // namespace detail

// Renders Gaussians into per-voxel class logits. Every voxel starts from
// b_empty on the empty channel; contributions then accumulate in ascending
// Gaussian index. Voxels are independent, so any thread count yields the
// same bits.
inline OccupancyGrid splat(const std::vector<SemanticGaussian>& gaussians,
                           const SpatialIndex& index, const GridSpec& spec,
                           std::size_t n_classes, std::size_t empty_index,
                           double b_empty = 1.0, int threads = 1) {
  detail::validate_splat_args(gaussians, spec, n_classes);
  if (empty_index >= n_classes)
    throw std::invalid_argument("splat: empty_index out of range");
  if (!std::isfinite(b_empty))
    throw std::invalid_argument("splat: b_empty must be finite");

  std::vector<Mat3> rotations(gaussians.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i)
    rotations[i] = quat_to_rot(gaussians[i].rotation);

  OccupancyGrid out = OccupancyGrid::zeros(spec, n_classes);
  const std::size_t n_voxels = spec.num_voxels();
  parallel_for(std::size_t{0}, n_voxels, threads, [&](std::size_t lo, std::size_t hi, int) {
    for (std::size_t v = lo; v < hi; ++v) {
      auto [ix, iy, iz] = spec.unlinear(v);
      const Vec3 center = spec.center(ix, iy, iz);
      double* row = out.logits_at(v);
      row[empty_index] += b_empty;
      for (std::size_t i : index.query(center)) {
        const SemanticGaussian& g = gaussians[i];
        double w = g.opacity *
                   std::exp(-0.5 * mahalanobis_sq(rotations[i], g.scale, center - g.mean));
        for (std::size_t k = 0; k < n_classes; ++k)
          row[k] += w * g.logits[static_cast<long>(k)];
      }
    }
  });
  return out;
}

// Per-Gaussian gradients of sum(upstream .* splat(...)). Rotation gradients
// are with respect to the stored quaternion and flow through the internal
// normalization, so they live in the tangent plane of the unit sphere.
struct SplatGrads {
  std::vector<Vec3> d_mean;
  std::vector<Vec4> d_rotation;
  std::vector<Vec3> d_scale;
  std::vector<double> d_opacity;
  std::vector<VecX> d_logits;

  static SplatGrads zeros(std::size_t n, std::size_t n_classes) {
    SplatGrads g;
    g.d_mean.assign(n, Vec3::Zero());
    g.d_rotation.assign(n, Vec4::Zero());
    g.d_scale.assign(n, Vec3::Zero());
    g.d_opacity.assign(n, 0.0);
    g.d_logits.assign(n, VecX::Zero(static_cast<long>(n_classes)));
    return g;
  }

  void accumulate(const SplatGrads& other) {
    for (std::size_t i = 0; i < d_mean.size(); ++i) {
      d_mean[i] += other.d_mean[i];
      d_rotation[i] += other.d_rotation[i];
      d_scale[i] += other.d_scale[i];
      d_opacity[i] += other.d_opacity[i];
      d_logits[i] += other.d_logits[i];
    }
  }
};

namespace detail {

// Derivative of the rotation matrix with respect to each component of the
// normalized quaternion (w, x, y, z).
inline std::array<Mat3, 4> rotation_jacobian(const Vec4& unit_quat) {
  const double w = unit_quat[0], x = unit_quat[1], y = unit_quat[2], z = unit_quat[3];
  std::array<Mat3, 4> d;
  d[0] << 0, -2 * z, 2 * y,
          2 * z, 0, -2 * x,
          -2 * y, 2 * x, 0;
  d[1] << 0, 2 * y, 2 * z,
          2 * y, -4 * x, -2 * w,
          2 * z, 2 * w, -4 * x;
  d[2] << -4 * y, 2 * x, 2 * w,
          2 * x, 0, 2 * z,
          -2 * w, 2 * z, -4 * y;
  d[3] << -4 * z, -2 * w, 2 * x,
          2 * w, -4 * z, 2 * y,
          2 * x, 2 * y, 0;
  return d;
}

}  // namespace detail

// Accumulates dL/d(parameters) for L = sum over voxels and classes of
// upstream * rendered logit. The background term is constant and the
// candidate set from the index is treated as fixed support, matching a
// forward pass that reuses the same index. Threads shard the voxel range
// into per-thread buffers merged in thread order, so a fixed thread count
// is bit-reproducible.
inline SplatGrads splat_backward(const std::vector<SemanticGaussian>& gaussians,
                                 const SpatialIndex& index, const GridSpec& spec,
                                 const OccupancyGrid& upstream, int threads = 1) {
  if (upstream.is_labels())
    throw std::invalid_argument("splat_backward: upstream must carry logits");
  if (upstream.spec.counts != spec.counts)
    throw std::invalid_argument("splat_backward: upstream grid shape mismatch");
  const std::size_t n_classes = upstream.n_classes;
  detail::validate_splat_args(gaussians, spec, n_classes);

  const std::size_t n = gaussians.size();
  struct Prepared {
    Mat3 rot;
    Vec4 unit_quat;
    double quat_norm = 1.0;
    std::array<Mat3, 4> rot_jac;
  };
  std::vector<Prepared> prep(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec4& q = gaussians[i].rotation;
    Prepared p;
    p.quat_norm = q.norm();
    p.unit_quat = q / p.quat_norm;
    p.rot = quat_to_rot(q);
    p.rot_jac = detail::rotation_jacobian(p.unit_quat);
    prep[i] = p;
  }

  const int t = std::max(1, threads);
  std::vector<SplatGrads> shards(static_cast<std::size_t>(t));
  for (auto& s : shards) s = SplatGrads::zeros(n, n_classes);

  const std::size_t n_voxels = spec.num_voxels();
  parallel_for(std::size_t{0}, n_voxels, t, [&](std::size_t lo, std::size_t hi, int tid) {
    SplatGrads& acc = shards[static_cast<std::size_t>(tid)];
    for (std::size_t v = lo; v < hi; ++v) {
      auto [ix, iy, iz] = spec.unlinear(v);
      const Vec3 center = spec.center(ix, iy, iz);
      const double* u = upstream.logits_at(v);
      for (std::size_t i : index.query(center)) {
        const SemanticGaussian& g = gaussians[i];
        const Prepared& p = prep[i];
        const Vec3 delta = center - g.mean;
        const Vec3 local = p.rot.transpose() * delta;
        double m2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          double s = local[a] / g.scale[a];
          m2 += s * s;
        }
        const double falloff = std::exp(-0.5 * m2);
        const double weight = g.opacity * falloff;

        double dot = 0.0;
        for (std::size_t k = 0; k < n_classes; ++k)
          dot += u[k] * g.logits[static_cast<long>(k)];

        for (std::size_t k = 0; k < n_classes; ++k)
          acc.d_logits[i][static_cast<long>(k)] += weight * u[k];
        acc.d_opacity[i] += falloff * dot;

        const double coeff = weight * dot;
        // local / scale^2 is the factored form of Sigma^{-1} (x - mean) in
        // the Gaussian frame; rotating back gives the mean gradient.
        Vec3 zhat;
        for (int a = 0; a < 3; ++a) zhat[a] = local[a] / (g.scale[a] * g.scale[a]);
        acc.d_mean[i] += coeff * (p.rot * zhat);
        for (int a = 0; a < 3; ++a)
          acc.d_scale[i][a] += coeff * local[a] * local[a] /
                               (g.scale[a] * g.scale[a] * g.scale[a]);

        // d(exponent)/d(unit quat component j) = -<dR_j, delta zhat^T>.
        const Mat3 outer = delta * zhat.transpose();
        for (int j = 0; j < 4; ++j)
          acc.d_rotation[i][j] -= coeff * p.rot_jac[static_cast<std::size_t>(j)]
                                              .cwiseProduct(outer)
                                              .sum();
      }
    }
  });

  SplatGrads total = std::move(shards[0]);
  for (int s = 1; s < t; ++s) total.accumulate(shards[static_cast<std::size_t>(s)]);

  // Chain through quaternion normalization: project onto the tangent plane
  // at the unit quaternion and divide by the raw norm.
  for (std::size_t i = 0; i < n; ++i) {
    const Vec4& r = prep[i].unit_quat;
    total.d_rotation[i] =
        (total.d_rotation[i] - r * r.dot(total.d_rotation[i])) / prep[i].quat_norm;
  }
  return total;
}

}  // namespace gocc

#endif
