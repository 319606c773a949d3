#ifndef GOCC_GRID_HPP
#define GOCC_GRID_HPP

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gocc {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Axis-aligned voxel lattice: min corner, per-axis voxel size, per-axis
/// voxel counts. The max corner is always origin + resolution .* counts.
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 resolution = Vec3::Ones();
  std::array<std::int64_t, 3> counts = {1, 1, 1};

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (!(resolution[a] > 0.0))
        throw std::invalid_argument("GridSpec: resolution must be positive");
      if (counts[a] < 1)
        throw std::invalid_argument("GridSpec: counts must be >= 1");
    }
  }

  Vec3 max_corner() const {
    return origin + Vec3(resolution[0] * static_cast<double>(counts[0]),
                         resolution[1] * static_cast<double>(counts[1]),
                         resolution[2] * static_cast<double>(counts[2]));
  }

  std::size_t num_voxels() const {
    return static_cast<std::size_t>(counts[0]) *
           static_cast<std::size_t>(counts[1]) *
           static_cast<std::size_t>(counts[2]);
  }

  // z-fastest linear order, shared by every grid consumer and file format.
  std::size_t linear(std::int64_t ix, std::int64_t iy, std::int64_t iz) const {
    return (static_cast<std::size_t>(ix) * static_cast<std::size_t>(counts[1]) +
            static_cast<std::size_t>(iy)) *
               static_cast<std::size_t>(counts[2]) +
           static_cast<std::size_t>(iz);
  }

  std::array<std::int64_t, 3> unlinear(std::size_t idx) const {
    const auto nz = static_cast<std::size_t>(counts[2]);
    const auto ny = static_cast<std::size_t>(counts[1]);
    std::int64_t iz = static_cast<std::int64_t>(idx % nz);
    std::int64_t iy = static_cast<std::int64_t>((idx / nz) % ny);
    std::int64_t ix = static_cast<std::int64_t>(idx / (nz * ny));
    return {ix, iy, iz};
  }

  Vec3 center(std::int64_t ix, std::int64_t iy, std::int64_t iz) const {
    return Vec3(origin[0] + (static_cast<double>(ix) + 0.5) * resolution[0],
                origin[1] + (static_cast<double>(iy) + 0.5) * resolution[1],
                origin[2] + (static_cast<double>(iz) + 0.5) * resolution[2]);
  }

  // Voxel containing p, or nullopt when p is outside the lattice.
  std::optional<std::array<std::int64_t, 3>> locate(const Vec3& p) const {
    std::array<std::int64_t, 3> out;
    for (int a = 0; a < 3; ++a) {
      double t = std::floor((p[a] - origin[a]) / resolution[a]);
      if (t < 0.0 || t >= static_cast<double>(counts[a])) return std::nullopt;
      out[a] = static_cast<std::int64_t>(t);
    }
    return out;
  }
};

/// Dense semantic occupancy over a GridSpec. Holds either per-voxel class
/// logits (num_voxels x n_classes, class-fastest) or per-voxel label ids,
/// never both.
struct OccupancyGrid {
  GridSpec spec;
  std::size_t n_classes = 0;
  std::vector<double> values;        // logit mode
  std::vector<std::uint16_t> labels; // label mode

  bool is_labels() const { return values.empty(); }

  static OccupancyGrid zeros(const GridSpec& spec, std::size_t n_classes) {
    spec.validate();
    OccupancyGrid g;
    g.spec = spec;
    g.n_classes = n_classes;
    g.values.assign(spec.num_voxels() * n_classes, 0.0);
    return g;
  }

  static OccupancyGrid empty_labels(const GridSpec& spec,
                                    std::size_t n_classes,
                                    std::uint16_t fill = 0) {
    spec.validate();
    OccupancyGrid g;
    g.spec = spec;
    g.n_classes = n_classes;
    g.labels.assign(spec.num_voxels(), fill);
    return g;
  }

  double* logits_at(std::size_t voxel) { return values.data() + voxel * n_classes; }
  const double* logits_at(std::size_t voxel) const {
    return values.data() + voxel * n_classes;
  }

  // Collapses logit mode to labels by per-voxel argmax (lowest index wins ties).
  OccupancyGrid argmax_labels() const {
    if (is_labels()) return *this;
    OccupancyGrid out = empty_labels(spec, n_classes);
    const std::size_t n = spec.num_voxels();
    for (std::size_t v = 0; v < n; ++v) {
      const double* row = logits_at(v);
      std::size_t best = 0;
      for (std::size_t c = 1; c < n_classes; ++c)
        if (row[c] > row[best]) best = c;
      out.labels[v] = static_cast<std::uint16_t>(best);
    }
    return out;
  }
};

/// Class vocabulary. Index 0 is conventionally the empty class in shipped
/// scenes, but any index may be designated.
struct ClassSet {
  std::vector<std::string> names;
  std::size_t empty_index = 0;

  std::size_t size() const { return names.size(); }

  void validate() const {
    if (names.empty()) throw std::invalid_argument("ClassSet: no classes");
    if (empty_index >= names.size())
      throw std::invalid_argument("ClassSet: empty_index out of range");
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i + 1; j < names.size(); ++j)
        if (names[i] == names[j])
          throw std::invalid_argument("ClassSet: duplicate class name " + names[i]);
  }
};

}  // namespace gocc

#endif
