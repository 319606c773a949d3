// Supervision losses over occupancy grids: per-voxel cross-entropy and the
// Lovasz-softmax relaxation of the Jaccard index. Both return the scalar
// loss together with per-voxel logit gradients, ready to feed the splatting
// adjoint.
#ifndef GOCC_LOSSES_HPP
#define GOCC_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gocc/grid.hpp"

namespace gocc {

struct LossResult {
  double value = 0.0;
  OccupancyGrid grad;  // logit-mode grid, same shape as the prediction
};

namespace detail {

inline void validate_loss_args(const OccupancyGrid& pred, const OccupancyGrid& gt) {
  if (pred.is_labels()) throw std::invalid_argument("loss: prediction must carry logits");
  if (!gt.is_labels()) throw std::invalid_argument("loss: ground truth must carry labels");
  if (pred.spec.counts != gt.spec.counts)
    throw std::invalid_argument("loss: prediction and ground truth shapes differ");
  if (pred.n_classes == 0 || pred.spec.num_voxels() == 0)
    throw std::invalid_argument("loss: empty prediction");
  for (std::uint16_t label : gt.labels)
    if (label >= pred.n_classes)
      throw std::invalid_argument("loss: label out of class range");
}

inline void softmax_row(const double* logits, std::size_t n, double* out) {
  double m = logits[0];
  for (std::size_t c = 1; c < n; ++c) m = std::max(m, logits[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    out[c] = std::exp(logits[c] - m);
    sum += out[c];
  }
  for (std::size_t c = 0; c < n; ++c) out[c] /= sum;
}

}  // namespace detail

// Mean over voxels of -log softmax(logits)[label]. The gradient per voxel is
// (softmax - one_hot) / N, computed with the usual max-shifted log-sum-exp.
inline LossResult cross_entropy(const OccupancyGrid& pred, const OccupancyGrid& gt) {
  detail::validate_loss_args(pred, gt);
  const std::size_t n_voxels = pred.spec.num_voxels();
  const std::size_t n_classes = pred.n_classes;
  const double inv_n = 1.0 / static_cast<double>(n_voxels);

  LossResult res;
  res.grad = OccupancyGrid::zeros(pred.spec, n_classes);
  std::vector<double> p(n_classes);
  double acc = 0.0;
  for (std::size_t v = 0; v < n_voxels; ++v) {
    const double* row = pred.logits_at(v);
    double m = row[0];
    for (std::size_t c = 1; c < n_classes; ++c) m = std::max(m, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      p[c] = std::exp(row[c] - m);
      sum += p[c];
    }
    const std::uint16_t label = gt.labels[v];
    acc += std::log(sum) + m - row[label];

    double* g = res.grad.logits_at(v);
    for (std::size_t c = 0; c < n_classes; ++c) g[c] = p[c] / sum * inv_n;
    g[label] -= inv_n;
  }
  res.value = acc * inv_n;
  return res;
}

// Lovasz-softmax. For each class present in the labels, the per-voxel errors
// |indicator - softmax_c| are sorted descending (ties broken by voxel index)
// and paired with the discrete derivative of the Jaccard loss over the
// nested prefix sets, which running intersection/union counters produce in
// one pass. The sort permutation is treated as locally constant, so the
// gradient reaches the logits through the softmax Jacobian only.
inline LossResult lovasz_softmax(const OccupancyGrid& pred, const OccupancyGrid& gt) {
  detail::validate_loss_args(pred, gt);
  const std::size_t n_voxels = pred.spec.num_voxels();
  const std::size_t n_classes = pred.n_classes;

  std::vector<double> softmax(n_voxels * n_classes);
  for (std::size_t v = 0; v < n_voxels; ++v)
    detail::softmax_row(pred.logits_at(v), n_classes, &softmax[v * n_classes]);

  std::vector<char> seen(n_classes, 0);
  for (std::uint16_t label : gt.labels) seen[label] = 1;
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (seen[c]) present.push_back(c);
  const double inv_present = 1.0 / static_cast<double>(present.size());

  LossResult res;
  res.grad = OccupancyGrid::zeros(pred.spec, n_classes);

  std::vector<double> err(n_voxels);
  std::vector<std::size_t> order(n_voxels);
  std::vector<double> d_err(n_voxels);
  for (std::size_t c : present) {
    std::size_t total_pos = 0;
    for (std::size_t v = 0; v < n_voxels; ++v) {
      const bool is_pos = gt.labels[v] == c;
      total_pos += is_pos ? 1 : 0;
      err[v] = is_pos ? 1.0 - softmax[v * n_classes + c] : softmax[v * n_classes + c];
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return err[a] > err[b]; });

    double inter = static_cast<double>(total_pos);
    double uni = static_cast<double>(total_pos);
    double prev_jaccard = 0.0;  // empty prefix: loss 1 - P/P
    double loss_c = 0.0;
    for (std::size_t k = 0; k < n_voxels; ++k) {
      const std::size_t v = order[k];
      if (gt.labels[v] == c) inter -= 1.0;
      else uni += 1.0;
      const double jaccard = 1.0 - inter / uni;
      const double step = jaccard - prev_jaccard;
      prev_jaccard = jaccard;
      loss_c += err[v] * step;
      d_err[v] = step;
    }
    res.value += loss_c * inv_present;

    for (std::size_t v = 0; v < n_voxels; ++v) {
      const double d_pc =
          (gt.labels[v] == c ? -d_err[v] : d_err[v]) * inv_present;
      const double* p = &softmax[v * n_classes];
      double* g = res.grad.logits_at(v);
      // Chain through the softmax: d p_c / d logit_j = p_c (delta_cj - p_j).
      const double pc = p[c];
      for (std::size_t j = 0; j < n_classes; ++j) g[j] -= d_pc * pc * p[j];
      g[c] += d_pc * pc;
    }
  }
  return res;
}

// Combined training objective: cross-entropy plus lovasz_weight times the
// Lovasz-softmax term, gradients summed with the same weight.
inline LossResult total_loss(const OccupancyGrid& pred, const OccupancyGrid& gt,
                             double lovasz_weight = 1.0) {
  LossResult ce = cross_entropy(pred, gt);
  LossResult lov = lovasz_softmax(pred, gt);
  LossResult res;
  res.value = ce.value + lovasz_weight * lov.value;
  res.grad = std::move(ce.grad);
  for (std::size_t i = 0; i < res.grad.values.size(); ++i)
    res.grad.values[i] += lovasz_weight * lov.grad.values[i];
  return res;
}

}  // namespace gocc

#endif
