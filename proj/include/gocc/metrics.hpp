// Evaluation metrics: per-class confusion counts, geometry IoU (occupied vs
// empty), and mIoU over non-empty classes.
#ifndef GOCC_METRICS_HPP
#define GOCC_METRICS_HPP

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gocc/grid.hpp"

namespace gocc {

// Per-class true positive / false positive / false negative counts. Every
// evaluated voxel lands in exactly one TP or FN bucket for its ground-truth
// class, so sum(tp) + sum(fn) equals the evaluated voxel count.
struct ConfusionCounts {
  std::vector<std::uint64_t> tp, fp, fn;
  std::uint64_t evaluated = 0;

  std::size_t n_classes() const { return tp.size(); }
};

// Tallies confusion between predicted and ground-truth label grids. A null
// mask evaluates every voxel; otherwise only voxels with a nonzero mask byte
// count.
inline ConfusionCounts confusion(const OccupancyGrid& pred, const OccupancyGrid& gt,
                                 std::size_t n_classes,
                                 const std::vector<std::uint8_t>* mask = nullptr) {
  if (!pred.is_labels() || !gt.is_labels())
    throw std::invalid_argument("confusion: both grids must carry labels");
  if (pred.spec.counts != gt.spec.counts)
    throw std::invalid_argument("confusion: grid shapes differ");
  const std::size_t n = pred.labels.size();
  if (mask && mask->size() != n)
    throw std::invalid_argument("confusion: mask size mismatch");

  ConfusionCounts counts;
  counts.tp.assign(n_classes, 0);
  counts.fp.assign(n_classes, 0);
  counts.fn.assign(n_classes, 0);
  for (std::size_t v = 0; v < n; ++v) {
    if (mask && (*mask)[v] == 0) continue;
    const std::uint16_t p = pred.labels[v], g = gt.labels[v];
    if (p >= n_classes || g >= n_classes)
      throw std::invalid_argument("confusion: label out of class range");
    ++counts.evaluated;
    if (p == g) {
      ++counts.tp[p];
    } else {
      ++counts.fp[p];
      ++counts.fn[g];
    }
  }
  return counts;
}

struct MetricsResult {
  double geometry_iou = 0.0;
  double miou = 0.0;
  // Per-class IoU; classes absent from both grids hold NaN and are excluded
  // from the mIoU mean, as is the empty class.
  std::vector<double> per_class;
};

// Derives both metrics from confusion counts. Geometry IoU collapses all
// non-empty classes into a single "occupied" label; with the empty class
// tracked like any other, occupied TP = evaluated - TP_e - FP_e - FN_e,
// occupied FP = FN_e, occupied FN = FP_e. A scene empty in both grids has
// nothing to get wrong and scores 1.
inline MetricsResult iou_miou(const ConfusionCounts& counts, std::size_t empty_index) {
  const std::size_t n_classes = counts.n_classes();
  if (empty_index >= n_classes)
    throw std::invalid_argument("iou_miou: empty_index out of range");

  MetricsResult res;
  res.per_class.assign(n_classes, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  std::size_t considered = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const std::uint64_t denom = counts.tp[c] + counts.fp[c] + counts.fn[c];
    if (denom == 0) continue;
    res.per_class[c] = static_cast<double>(counts.tp[c]) / static_cast<double>(denom);
    if (c != empty_index) {
      sum += res.per_class[c];
      ++considered;
    }
  }
  res.miou = considered == 0 ? 1.0 : sum / static_cast<double>(considered);

  const std::uint64_t te = counts.tp[empty_index], fe = counts.fp[empty_index],
                      ne = counts.fn[empty_index];
  const std::uint64_t occ_tp = counts.evaluated - te - fe - ne;
  const std::uint64_t occ_denom = counts.evaluated - te;
  res.geometry_iou =
      occ_denom == 0 ? 1.0
                     : static_cast<double>(occ_tp) / static_cast<double>(occ_denom);
  return res;
}

}  // namespace gocc

#endif
