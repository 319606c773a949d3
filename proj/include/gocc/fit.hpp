#ifndef GOCC_FIT_HPP
#define GOCC_FIT_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gocc/gaussian.hpp"
#include "gocc/grid.hpp"
#include "gocc/init.hpp"
#include "gocc/io.hpp"
#include "gocc/lidar.hpp"
#include "gocc/losses.hpp"
#include "gocc/metrics.hpp"
#include "gocc/splat.hpp"

namespace gocc {

/// Plain gradient descent on Gaussian properties, one learning rate per
/// parameter group. Scales are stepped in log space and opacities through
/// their logit, so both stay inside their valid ranges; quaternions take an
/// ambient step and are renormalized (projected descent).
struct FitConfig {
  std::size_t iterations = 500;
  double lr_mean = 1e-2;
  double lr_scale_log = 1e-2;
  double lr_rotation = 1e-3;
  double lr_opacity_logit = 1e-2;
  double lr_logits = 5e-2;
  double lovasz_weight = 1.0;
  double kappa = 3.0;
  double kappa_pad = 3.5;
  double b_empty = 1.0;
  std::size_t n_gaussians = 512;
  std::size_t empty_index = 0;
  std::size_t eval_every = 50;
  std::uint64_t rng_seed = 0;
  int threads = 1;

  void validate() const {
    if (iterations == 0) throw std::invalid_argument("FitConfig: iterations must be positive");
    if (n_gaussians == 0) throw std::invalid_argument("FitConfig: n_gaussians must be positive");
    if (eval_every == 0) throw std::invalid_argument("FitConfig: eval_every must be positive");
    for (double lr : {lr_mean, lr_scale_log, lr_rotation, lr_opacity_logit, lr_logits})
      if (!(lr > 0.0)) throw std::invalid_argument("FitConfig: learning rates must be positive");
    if (!(lovasz_weight >= 0.0))
      throw std::invalid_argument("FitConfig: lovasz_weight must be non-negative");
    if (!(kappa > 0.0)) throw std::invalid_argument("FitConfig: kappa must be positive");
  }
};

/// The optimizer diverged: the loss or the parameters stopped being finite
/// at `iteration`.
struct NumericalAbort : std::runtime_error {
  std::size_t iteration;
  NumericalAbort(std::size_t it, const char* what)
      : std::runtime_error(std::string(what) + " at iteration " + std::to_string(it)),
        iteration(it) {}
};

struct FitResult {
  std::vector<SemanticGaussian> gaussians;
  OccupancyGrid prediction;  // logits of the final parameters
  MetricsResult metrics;     // evaluation of `prediction`
  std::vector<TraceRow> trace;  // one row per iteration plus a final row
};

/// Initialization used by both the fitting loop and the forward pipeline:
/// seeds from occupied voxels of the target lattice, with half-voxel default
/// scales so a fresh Gaussian roughly covers its own cell. Seed logits put
/// one unit on every non-empty class and nothing on the empty channel; an
/// all-zero class vector would multiply itself into every geometry gradient
/// and freeze means, scales and rotations at exactly zero update.
inline InitConfig fit_init_config(const GridSpec& spec, std::size_t n_classes,
                                  const FitConfig& cfg) {
  InitConfig init;
  init.n_gaussians = cfg.n_gaussians;
  init.n_classes = n_classes;
  init.default_scale = 0.5 * spec.resolution;
  init.default_logits = VecX::Ones(static_cast<long>(n_classes));
  init.default_logits[static_cast<long>(cfg.empty_index)] = 0.0;
  init.extent_min = spec.origin;
  init.extent_max = spec.max_corner();
  init.rng_seed = cfg.rng_seed;
  return init;
}

/// Argmax the prediction if needed and score it against ground-truth labels.
inline MetricsResult evaluate_prediction(const OccupancyGrid& pred,
                                         const OccupancyGrid& gt,
                                         std::size_t empty_index) {
  const OccupancyGrid labels = pred.argmax_labels();
  return iou_miou(confusion(labels, gt, gt.n_classes), empty_index);
}

namespace detail {

inline void apply_updates(std::vector<SemanticGaussian>& gaussians,
                          const SplatGrads& grads, const FitConfig& cfg) {
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    SemanticGaussian& g = gaussians[i];
    g.mean -= cfg.lr_mean * grads.d_mean[i];

    for (int a = 0; a < 3; ++a) {
      // d/d(log s) = s * d/ds, then exponentiate back.
      double u = std::log(g.scale[a]);
      u -= cfg.lr_scale_log * grads.d_scale[i][a] * g.scale[a];
      g.scale[a] = std::max(std::exp(u), kMinScale);
    }

    Vec4 q = g.rotation - cfg.lr_rotation * grads.d_rotation[i];
    const double n = q.norm();
    g.rotation = n > 1e-12 ? Vec4(q / n) : Vec4(1, 0, 0, 0);

    const double p = std::min(std::max(g.opacity, 1e-7), 1.0 - 1e-7);
    double logit = std::log(p / (1.0 - p));
    logit -= cfg.lr_opacity_logit * grads.d_opacity[i] * p * (1.0 - p);
    g.opacity = 1.0 / (1.0 + std::exp(-logit));

    g.logits -= cfg.lr_logits * grads.d_logits[i];
  }
}

// Exploding parameters do not reliably surface as a non-finite loss: the
// spatial index simply stops covering a Gaussian whose mean left the reals,
// and the loss settles at the empty-grid baseline. Catch them directly.
inline bool all_finite(const std::vector<SemanticGaussian>& gaussians) {
  for (const auto& g : gaussians)
    if (!g.mean.allFinite() || !g.rotation.allFinite() || !g.scale.allFinite() ||
        !std::isfinite(g.opacity) || !g.logits.allFinite())
      return false;
  return true;
}

// A diverging scale stays finite long after it has become fatal: its
// coverage ball blankets the spatial index with millions of cells before any
// value overflows. Bound scales by the working extent instead of waiting.
inline bool scales_within(const std::vector<SemanticGaussian>& gaussians, double limit) {
  for (const auto& g : gaussians)
    if (!(g.scale.maxCoeff() <= limit)) return false;
  return true;
}

}  // namespace detail

/// Initialize from the voxelized sweep aggregate, then descend on the
/// splat-and-score loss against the label grid. The trace carries one row
/// per optimization step (losses of the parameters entering that step) and
/// a final row for the returned parameters; IoU columns are filled every
/// eval_every steps and on the final row.
inline FitResult fit_gaussians(const VoxelFeatureSet& voxels, const OccupancyGrid& gt,
                               const FitConfig& cfg) {
  cfg.validate();
  if (!gt.is_labels())
    throw std::invalid_argument("fit_gaussians: ground truth must carry labels");
  gt.spec.validate();
  if (cfg.empty_index >= gt.n_classes)
    throw std::invalid_argument("fit_gaussians: empty_index out of class range");

  FitResult res;
  res.gaussians = init_gaussians(voxels, fit_init_config(gt.spec, gt.n_classes, cfg));
  res.trace.reserve(cfg.iterations + 1);

  auto forward = [&](const std::vector<SemanticGaussian>& gs) {
    const SpatialIndex index = build_index(gs, cfg.kappa, cfg.kappa_pad);
    return splat(gs, index, gt.spec, gt.n_classes, cfg.empty_index, cfg.b_empty,
                 cfg.threads);
  };
  const double scale_limit = 2.0 * (gt.spec.max_corner() - gt.spec.origin).norm();

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const OccupancyGrid pred = forward(res.gaussians);
    LossResult ce = cross_entropy(pred, gt);
    const LossResult lov = lovasz_softmax(pred, gt);
    const double total = ce.value + cfg.lovasz_weight * lov.value;
    if (!std::isfinite(total)) throw NumericalAbort(it, "non-finite loss");

    TraceRow row;
    row.iteration = it;
    row.ce = ce.value;
    row.lovasz = lov.value;
    row.total = total;
    if (it % cfg.eval_every == 0) {
      const MetricsResult m = evaluate_prediction(pred, gt, cfg.empty_index);
      row.iou = m.geometry_iou;
      row.miou = m.miou;
    }
    res.trace.push_back(row);

    OccupancyGrid upstream = std::move(ce.grad);
    for (std::size_t i = 0; i < upstream.values.size(); ++i)
      upstream.values[i] += cfg.lovasz_weight * lov.grad.values[i];

    const SpatialIndex index = build_index(res.gaussians, cfg.kappa, cfg.kappa_pad);
    const SplatGrads grads =
        splat_backward(res.gaussians, index, gt.spec, upstream, cfg.threads);
    detail::apply_updates(res.gaussians, grads, cfg);
    if (!detail::all_finite(res.gaussians))
      throw NumericalAbort(it + 1, "non-finite Gaussian parameters");
    if (!detail::scales_within(res.gaussians, scale_limit))
      throw NumericalAbort(it + 1, "scale divergence");
  }

  res.prediction = forward(res.gaussians);
  const LossResult ce = cross_entropy(res.prediction, gt);
  const LossResult lov = lovasz_softmax(res.prediction, gt);
  const double total = ce.value + cfg.lovasz_weight * lov.value;
  if (!std::isfinite(total)) throw NumericalAbort(cfg.iterations, "non-finite loss");
  res.metrics = evaluate_prediction(res.prediction, gt, cfg.empty_index);

  TraceRow last;
  last.iteration = cfg.iterations;
  last.ce = ce.value;
  last.lovasz = lov.value;
  last.total = total;
  last.iou = res.metrics.geometry_iou;
  last.miou = res.metrics.miou;
  res.trace.push_back(last);
  return res;
}

}  // namespace gocc

#endif
