// Attention composition over lifted features: per-Gaussian sampling plans,
// the fused LiDAR-camera query update, sparse self-encoding over a hash
// grid, and MLP-based Gaussian refinement, chained into forward blocks.
//
// All block parameters live in BlockWeights; nothing here trains them. The
// pipeline runs them forward with supplied or seeded values.
#ifndef GOCC_ATTENTION_HPP
#define GOCC_ATTENTION_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "gocc/gaussian.hpp"
#include "gocc/lidar.hpp"
#include "gocc/lifted.hpp"
#include "gocc/parallel.hpp"
#include "gocc/rng.hpp"

namespace gocc {

// One camera's multi-scale data: features[k] and depths[k] share scale-k
// pixel dimensions.
struct CameraPyramid {
  std::vector<FeatureMap> features;
  std::vector<DepthDistributionMap> depths;
};

// Static dimensions shared by every block of a scene. m is the query width,
// m_c the camera feature width, hidden the refinement MLP's middle layer,
// n_props = 11 + n_classes the per-Gaussian property count.
struct AttentionDims {
  int m = 0;
  int m_c = 0;
  int hidden = 0;
  int n_classes = 0;
  int n_cameras = 0;
  int n_scales = 4;
  int n_r1 = 4;
  int n_r2 = 2;

  int n_props() const { return 11 + n_classes; }
  int samples_per_camera() const { return n_scales * n_r1 * n_r2; }

  void validate() const {
    if (m <= 0 || m_c <= 0 || hidden <= 0 || n_classes <= 0 || n_cameras <= 0 ||
        n_scales <= 0 || n_r1 <= 0 || n_r2 <= 0)
      throw std::invalid_argument("AttentionDims: all dimensions must be positive");
  }
};

// Per-Gaussian sampling layout. stage1 holds world-space probe offsets in
// meters; stage2 holds per-probe refinements in scale-local pixels for u, v
// and depth-bin units for the third component, applied after projection.
// weights are attention coefficients laid out camera-major, then scale,
// stage-1 probe, stage-2 refinement; each camera's slice sums to 1.
struct SamplingPlan {
  int n_r1 = 0, n_r2 = 0, n_scales = 0, n_cameras = 0;
  std::vector<Vec3> stage1;    // n_r1
  std::vector<Vec3> stage2;    // n_r1 * n_r2
  std::vector<double> weights; // n_cameras * n_scales * n_r1 * n_r2

  std::size_t weight_index(int cam, int scale, int i, int j) const {
    return static_cast<std::size_t>(((cam * n_scales + scale) * n_r1 + i) * n_r2 + j);
  }

  void validate() const {
    if (stage1.size() != static_cast<std::size_t>(n_r1) ||
        stage2.size() != static_cast<std::size_t>(n_r1) * n_r2 ||
        weights.size() != static_cast<std::size_t>(n_cameras) * n_scales * n_r1 * n_r2)
      throw std::invalid_argument("SamplingPlan: inconsistent sizes");
    for (int cam = 0; cam < n_cameras; ++cam) {
      double sum = 0.0;
      for (int s = 0; s < n_scales; ++s)
        for (int i = 0; i < n_r1; ++i)
          for (int j = 0; j < n_r2; ++j) {
            double w = weights[weight_index(cam, s, i, j)];
            if (w < 0.0) throw std::invalid_argument("SamplingPlan: negative weight");
            sum += w;
          }
      if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("SamplingPlan: camera weights must sum to 1");
    }
  }
};

// Weights of one forward block. Serialized field order (matrices row-major):
// conv[0..26], offset1_w, offset1_b, offset2_w, offset2_b, weight_w,
// weight_b, value_w, mlp_w1, mlp_b1, mlp_w2, mlp_b2. Conv offset index is
// (dx+1)*9 + (dy+1)*3 + (dz+1) for dx, dy, dz in {-1, 0, 1}.
struct BlockWeights {
  double conv_cell_size = 1.0;
  std::vector<MatX> conv;  // 27 maps, each m x m
  MatX offset1_w;          // (3 * n_r1) x m
  VecX offset1_b;
  MatX offset2_w;          // (3 * n_r1 * n_r2) x m
  VecX offset2_b;
  MatX weight_w;           // (n_cameras * n_scales * n_r1 * n_r2) x m
  VecX weight_b;
  MatX value_w;            // m x m_c, bias-free so absent samples contribute zero
  MatX mlp_w1;             // hidden x m
  VecX mlp_b1;
  MatX mlp_w2;             // n_props x hidden
  VecX mlp_b2;

  void validate(const AttentionDims& d) const {
    d.validate();
    auto fail = [](const char* what) {
      throw std::invalid_argument(std::string("BlockWeights: bad shape for ") + what);
    };
    if (!(conv_cell_size > 0.0)) fail("conv_cell_size");
    if (conv.size() != 27) fail("conv map count");
    for (const MatX& w : conv)
      if (w.rows() != d.m || w.cols() != d.m) fail("conv map");
    if (offset1_w.rows() != 3 * d.n_r1 || offset1_w.cols() != d.m) fail("offset1_w");
    if (offset1_b.size() != 3 * d.n_r1) fail("offset1_b");
    if (offset2_w.rows() != 3 * d.n_r1 * d.n_r2 || offset2_w.cols() != d.m)
      fail("offset2_w");
    if (offset2_b.size() != 3 * d.n_r1 * d.n_r2) fail("offset2_b");
    const int n_w = d.n_cameras * d.samples_per_camera();
    if (weight_w.rows() != n_w || weight_w.cols() != d.m) fail("weight_w");
    if (weight_b.size() != n_w) fail("weight_b");
    if (value_w.rows() != d.m || value_w.cols() != d.m_c) fail("value_w");
    if (mlp_w1.rows() != d.hidden || mlp_w1.cols() != d.m) fail("mlp_w1");
    if (mlp_b1.size() != d.hidden) fail("mlp_b1");
    if (mlp_w2.rows() != d.n_props() || mlp_w2.cols() != d.hidden) fail("mlp_w2");
    if (mlp_b2.size() != d.n_props()) fail("mlp_b2");
  }
};

inline BlockWeights zero_block_weights(const AttentionDims& d) {
  d.validate();
  BlockWeights b;
  b.conv.assign(27, MatX::Zero(d.m, d.m));
  b.offset1_w = MatX::Zero(3 * d.n_r1, d.m);
  b.offset1_b = VecX::Zero(3 * d.n_r1);
  b.offset2_w = MatX::Zero(3 * d.n_r1 * d.n_r2, d.m);
  b.offset2_b = VecX::Zero(3 * d.n_r1 * d.n_r2);
  const int n_w = d.n_cameras * d.samples_per_camera();
  b.weight_w = MatX::Zero(n_w, d.m);
  b.weight_b = VecX::Zero(n_w);
  b.value_w = MatX::Zero(d.m, d.m_c);
  b.mlp_w1 = MatX::Zero(d.hidden, d.m);
  b.mlp_b1 = VecX::Zero(d.hidden);
  b.mlp_w2 = MatX::Zero(d.n_props(), d.hidden);
  b.mlp_b2 = VecX::Zero(d.n_props());
  return b;
}

// Seeded uniform fill in the serialized field order, so a (seed, dims) pair
// fully determines the weights.
inline BlockWeights random_block_weights(const AttentionDims& d, RngSequence& rng,
                                         double spread = 0.1) {
  BlockWeights b = zero_block_weights(d);
  auto fill_mat = [&](MatX& w) {
    for (long r = 0; r < w.rows(); ++r)
      for (long c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-spread, spread);
  };
  auto fill_vec = [&](VecX& v) {
    for (long i = 0; i < v.size(); ++i) v[i] = rng.uniform(-spread, spread);
  };
  for (MatX& w : b.conv) fill_mat(w);
  fill_mat(b.offset1_w);
  fill_vec(b.offset1_b);
  fill_mat(b.offset2_w);
  fill_vec(b.offset2_b);
  fill_mat(b.weight_w);
  fill_vec(b.weight_b);
  fill_mat(b.value_w);
  fill_mat(b.mlp_w1);
  fill_vec(b.mlp_b1);
  fill_mat(b.mlp_w2);
  fill_vec(b.mlp_b2);
  return b;
}

// Linear offset heads plus a per-camera softmax over the weight head's
// logits turn a query into a concrete sampling plan.
inline SamplingPlan make_sampling_plan(const VecX& query, const BlockWeights& bw,
                                       const AttentionDims& d) {
  bw.validate(d);
  if (query.size() != d.m)
    throw std::invalid_argument("make_sampling_plan: query width mismatch");

  SamplingPlan plan;
  plan.n_r1 = d.n_r1;
  plan.n_r2 = d.n_r2;
  plan.n_scales = d.n_scales;
  plan.n_cameras = d.n_cameras;

  const VecX o1 = bw.offset1_w * query + bw.offset1_b;
  plan.stage1.resize(static_cast<std::size_t>(d.n_r1));
  for (int i = 0; i < d.n_r1; ++i)
    plan.stage1[static_cast<std::size_t>(i)] =
        Vec3(o1[3 * i], o1[3 * i + 1], o1[3 * i + 2]);

  const VecX o2 = bw.offset2_w * query + bw.offset2_b;
  plan.stage2.resize(static_cast<std::size_t>(d.n_r1) * d.n_r2);
  for (int k = 0; k < d.n_r1 * d.n_r2; ++k)
    plan.stage2[static_cast<std::size_t>(k)] =
        Vec3(o2[3 * k], o2[3 * k + 1], o2[3 * k + 2]);

  const VecX logits = bw.weight_w * query + bw.weight_b;
  plan.weights.resize(static_cast<std::size_t>(logits.size()));
  const int per_cam = d.samples_per_camera();
  for (int cam = 0; cam < d.n_cameras; ++cam) {
    const int base = cam * per_cam;
    double m = logits[base];
    for (int k = 1; k < per_cam; ++k) m = std::max(m, logits[base + k]);
    double sum = 0.0;
    for (int k = 0; k < per_cam; ++k) {
      double e = std::exp(logits[base + k] - m);
      plan.weights[static_cast<std::size_t>(base + k)] = e;
      sum += e;
    }
    for (int k = 0; k < per_cam; ++k)
      plan.weights[static_cast<std::size_t>(base + k)] /= sum;
  }
  return plan;
}

// Stage-1 probe positions in world space: mean + stage-1 offset, exactly.
inline std::vector<Vec3> gen_reference_points(const SemanticGaussian& g,
                                              const SamplingPlan& plan) {
  std::vector<Vec3> points(plan.stage1.size());
  for (std::size_t i = 0; i < plan.stage1.size(); ++i)
    points[i] = g.mean + plan.stage1[i];
  return points;
}

// Weighted fused-feature aggregation for one Gaussian. Every probe is
// projected into every camera and scale; visible probes are refined by the
// stage-2 offsets and sampled from the factored lifted features, then mapped
// through the value projection. Probes a camera cannot see contribute
// nothing, but the average still divides by the full camera count.
inline VecX aggregate_query_update(const SemanticGaussian& g, const SamplingPlan& plan,
                                   const std::vector<CameraModel>& cameras,
                                   const std::vector<CameraPyramid>& pyramids,
                                   const MatX& value_w) {
  plan.validate();
  if (cameras.size() != static_cast<std::size_t>(plan.n_cameras) ||
      pyramids.size() != cameras.size())
    throw std::invalid_argument("aggregate_query_update: camera count mismatch");
  for (const CameraPyramid& pyr : pyramids)
    if (pyr.features.size() < static_cast<std::size_t>(plan.n_scales) ||
        pyr.depths.size() < static_cast<std::size_t>(plan.n_scales))
      throw std::invalid_argument("aggregate_query_update: pyramid too shallow");

  VecX dq = VecX::Zero(value_w.rows());
  for (int cam = 0; cam < plan.n_cameras; ++cam) {
    for (int scale = 0; scale < plan.n_scales; ++scale) {
      const FeatureMap& fc = pyramids[static_cast<std::size_t>(cam)]
                                 .features[static_cast<std::size_t>(scale)];
      const DepthDistributionMap& fd =
          pyramids[static_cast<std::size_t>(cam)].depths[static_cast<std::size_t>(scale)];
      if (value_w.cols() != fc.channels)
        throw std::invalid_argument("aggregate_query_update: value projection width");
      for (int i = 0; i < plan.n_r1; ++i) {
        const auto ref = project_reference(g.mean + plan.stage1[static_cast<std::size_t>(i)],
                                           cameras[static_cast<std::size_t>(cam)], scale);
        if (!ref) continue;
        const double t0 = fd.bins.to_bin_coord((*ref)[2]);
        for (int j = 0; j < plan.n_r2; ++j) {
          const double w = plan.weights[plan.weight_index(cam, scale, i, j)];
          if (w == 0.0) continue;
          const Vec3& o = plan.stage2[static_cast<std::size_t>(i * plan.n_r2 + j)];
          const VecX feat =
              sample_3d_bin(fc, fd, (*ref)[0] + o[0], (*ref)[1] + o[1], t0 + o[2]);
          dq += w * (value_w * feat);
        }
      }
    }
  }
  return dq / static_cast<double>(plan.n_cameras);
}

namespace detail {

struct ConvKey {
  std::int64_t x = 0, y = 0, z = 0;
  bool operator==(const ConvKey&) const = default;
};
struct ConvKeyHash {
  std::size_t operator()(const ConvKey& k) const {
    auto mix = [](std::uint64_t h, std::uint64_t v) {
      return h ^ (v * 0x9E3779B97F4A7C15ull + 0x7F4A7C15ull + (h << 6) + (h >> 2));
    };
    std::uint64_t h = 0x452821E638D01377ull;
    h = mix(h, static_cast<std::uint64_t>(k.x));
    h = mix(h, static_cast<std::uint64_t>(k.y));
    h = mix(h, static_cast<std::uint64_t>(k.z));
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

// Sparse self-encoding: Gaussian means are hashed into conv_cell_size cells;
// each query is replaced by ReLU of the sum over the 27 neighboring cells of
// conv[offset] times that cell's mean query. Cell means accumulate in
// ascending Gaussian order, so the result is deterministic.
inline std::vector<VecX> sparse_self_encode(const std::vector<SemanticGaussian>& gaussians,
                                            const std::vector<VecX>& queries,
                                            const BlockWeights& bw) {
  if (gaussians.size() != queries.size())
    throw std::invalid_argument("sparse_self_encode: query count mismatch");
  if (bw.conv.size() != 27 || !(bw.conv_cell_size > 0.0))
    throw std::invalid_argument("sparse_self_encode: bad conv configuration");
  if (gaussians.empty()) return {};
  const long m = queries[0].size();
  for (const VecX& q : queries)
    if (q.size() != m) throw std::invalid_argument("sparse_self_encode: ragged queries");

  auto cell_of = [&](const Vec3& p) {
    return detail::ConvKey{
        static_cast<std::int64_t>(std::floor(p[0] / bw.conv_cell_size)),
        static_cast<std::int64_t>(std::floor(p[1] / bw.conv_cell_size)),
        static_cast<std::int64_t>(std::floor(p[2] / bw.conv_cell_size))};
  };

  struct CellAgg {
    VecX sum;
    double count = 0.0;
  };
  std::unordered_map<detail::ConvKey, CellAgg, detail::ConvKeyHash> cells;
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    CellAgg& agg = cells[cell_of(gaussians[i].mean)];
    if (agg.count == 0.0) agg.sum = VecX::Zero(m);
    agg.sum += queries[i];
    agg.count += 1.0;
  }

  std::vector<VecX> out(queries.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const detail::ConvKey home = cell_of(gaussians[i].mean);
    VecX acc = VecX::Zero(m);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells.find(detail::ConvKey{home.x + dx, home.y + dy, home.z + dz});
          if (it == cells.end()) continue;
          const std::size_t o =
              static_cast<std::size_t>((dx + 1) * 9 + (dy + 1) * 3 + (dz + 1));
          acc += bw.conv[o] * (it->second.sum / it->second.count);
        }
    out[i] = acc.cwiseMax(0.0);
  }
  return out;
}

// Decodes a property delta from the query through the two-layer MLP and
// applies it under the representation's constraints: quaternions are
// re-normalized, scales move in log space and stay floored, opacity moves
// through its logit. Delta layout: mean(3), rotation(4), log-scale(3),
// opacity-logit(1), class logits(n_classes).
inline SemanticGaussian refine(const SemanticGaussian& g, const VecX& query,
                               const BlockWeights& bw, int n_classes) {
  if (bw.mlp_w1.cols() != query.size() || bw.mlp_w2.rows() != 11 + n_classes ||
      bw.mlp_w2.cols() != bw.mlp_w1.rows() || bw.mlp_b1.size() != bw.mlp_w1.rows() ||
      bw.mlp_b2.size() != bw.mlp_w2.rows())
    throw std::invalid_argument("refine: MLP shape mismatch");
  if (g.logits.size() != n_classes)
    throw std::invalid_argument("refine: Gaussian class width mismatch");

  const VecX hidden = (bw.mlp_w1 * query + bw.mlp_b1).cwiseMax(0.0);
  const VecX delta = bw.mlp_w2 * hidden + bw.mlp_b2;

  const Vec3 mean = g.mean + Vec3(delta[0], delta[1], delta[2]);
  Vec4 rotation = g.rotation + Vec4(delta[3], delta[4], delta[5], delta[6]);
  if (rotation.norm() < 1e-9) rotation = g.rotation;

  Vec3 scale;
  for (int a = 0; a < 3; ++a) scale[a] = std::exp(std::log(g.scale[a]) + delta[7 + a]);

  const double p = std::clamp(g.opacity, 1e-7, 1.0 - 1e-7);
  const double opacity = 1.0 / (1.0 + std::exp(-(std::log(p / (1.0 - p)) + delta[10])));

  const VecX logits = g.logits + delta.tail(n_classes);
  return make_gaussian(mean, rotation, scale, opacity, logits);
}

// One forward block: self-encode all queries over the current means, then
// per Gaussian build the plan, aggregate the fused-feature update into the
// query, and refine the Gaussian from it. Per-Gaussian work writes disjoint
// slots, so any thread count gives identical results.
inline void run_block(std::vector<SemanticGaussian>& gaussians, std::vector<VecX>& queries,
                      const std::vector<CameraModel>& cameras,
                      const std::vector<CameraPyramid>& pyramids, const BlockWeights& bw,
                      const AttentionDims& dims, int threads = 1) {
  bw.validate(dims);
  queries = sparse_self_encode(gaussians, queries, bw);
  parallel_for(std::size_t{0}, gaussians.size(), threads,
               [&](std::size_t lo, std::size_t hi, int) {
                 for (std::size_t i = lo; i < hi; ++i) {
                   const SamplingPlan plan = make_sampling_plan(queries[i], bw, dims);
                   queries[i] +=
                       aggregate_query_update(gaussians[i], plan, cameras, pyramids,
                                              bw.value_w);
                   gaussians[i] = refine(gaussians[i], queries[i], bw, dims.n_classes);
                 }
               });
}

inline void run_blocks(std::vector<SemanticGaussian>& gaussians,
                       std::vector<VecX>& queries,
                       const std::vector<CameraModel>& cameras,
                       const std::vector<CameraPyramid>& pyramids,
                       const std::vector<BlockWeights>& blocks,
                       const AttentionDims& dims, int threads = 1) {
  if (blocks.empty()) throw std::invalid_argument("run_blocks: need at least one block");
  for (const BlockWeights& bw : blocks)
    run_block(gaussians, queries, cameras, pyramids, bw, dims, threads);
}

}  // namespace gocc

#endif
