#ifndef GOCC_INIT_HPP
#define GOCC_INIT_HPP

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gocc/gaussian.hpp"
#include "gocc/lidar.hpp"
#include "gocc/rng.hpp"

namespace gocc {

struct InitConfig {
  std::size_t n_gaussians = 25600;
  std::size_t n_classes = 0;
  Vec4 default_rotation = Vec4(1, 0, 0, 0);
  Vec3 default_scale = Vec3(0.075, 0.075, 0.2);  // one lidar voxel per axis
  double default_opacity = 0.1;
  VecX default_logits;  // empty means zeros(n_classes)
  Vec3 extent_min = Vec3::Zero();
  Vec3 extent_max = Vec3::Ones();
  std::uint64_t rng_seed = 0;
  bool allow_empty_fallback = true;
};

/// Seeds Gaussians from occupied lidar voxels.
///
/// With at least n_gaussians occupied voxels, a seeded uniform subset of
/// exactly n_gaussians voxels is chosen and each seeds one Gaussian (mean =
/// voxel mean position, opacity = voxel mean intensity). With fewer voxels,
/// every voxel seeds one Gaussian at a seeded uniform choice of slots and the
/// remaining slots get default properties with means drawn uniformly inside
/// [extent_min, extent_max). Rotation, scale and logits always come from the
/// config defaults.
///
/// Draw order is fixed (subset shuffle first, then fill-in means in ascending
/// slot order), so a fixed seed gives byte-identical output.
inline std::vector<SemanticGaussian> init_gaussians(const VoxelFeatureSet& voxels,
                                                    const InitConfig& cfg) {
  if (cfg.n_gaussians == 0)
    throw std::invalid_argument("init_gaussians: n_gaussians must be positive");
  if (cfg.n_classes == 0 && cfg.default_logits.size() == 0)
    throw std::invalid_argument("init_gaussians: class count unknown");
  const std::size_t n_v = voxels.voxels.size();
  if (n_v == 0 && !cfg.allow_empty_fallback)
    throw std::invalid_argument(
        "init_gaussians: no occupied voxels and fallback disabled");
  for (int a = 0; a < 3; ++a)
    if (!(cfg.extent_min[a] < cfg.extent_max[a]))
      throw std::invalid_argument("init_gaussians: degenerate extent");

  const VecX defaults = cfg.default_logits.size() > 0
                            ? cfg.default_logits
                            : VecX::Zero(static_cast<long>(cfg.n_classes));
  const std::size_t n_g = cfg.n_gaussians;
  RngSequence rng(cfg.rng_seed);

  // Slot -> voxel assignment. SIZE_MAX marks a default-filled slot.
  std::vector<std::size_t> assignment(n_g, static_cast<std::size_t>(-1));
  if (n_v >= n_g) {
    std::vector<std::size_t> voxel_ids(n_v);
    std::iota(voxel_ids.begin(), voxel_ids.end(), std::size_t{0});
    partial_shuffle(voxel_ids, n_g, rng);
    for (std::size_t i = 0; i < n_g; ++i) assignment[i] = voxel_ids[i];
  } else if (n_v > 0) {
    std::vector<std::size_t> slots(n_g);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    partial_shuffle(slots, n_v, rng);
    for (std::size_t k = 0; k < n_v; ++k) assignment[slots[k]] = k;
  }

  std::vector<SemanticGaussian> out;
  out.reserve(n_g);
  for (std::size_t i = 0; i < n_g; ++i) {
    if (assignment[i] != static_cast<std::size_t>(-1)) {
      const VoxelFeature& v = voxels.voxels[assignment[i]];
      out.push_back(make_gaussian(v.mean_position, cfg.default_rotation,
                                  cfg.default_scale, v.mean_intensity, defaults));
    } else {
      Vec3 m(rng.uniform(cfg.extent_min[0], cfg.extent_max[0]),
             rng.uniform(cfg.extent_min[1], cfg.extent_max[1]),
             rng.uniform(cfg.extent_min[2], cfg.extent_max[2]));
      out.push_back(make_gaussian(m, cfg.default_rotation, cfg.default_scale,
                                  cfg.default_opacity, defaults));
    }
  }
  return out;
}

}  // namespace gocc

#endif
