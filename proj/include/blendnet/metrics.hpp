#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "blendnet/boxes.hpp"

namespace blendnet {

// Inputs to AP/recall computation, pooled across all evaluated frames of a
// split. `frame` is any key that is unique per (clip, frame) pair.
struct EvalDet {
  int frame = 0;
  BBox box;
  double score = 0.0;
};

struct EvalGt {
  int frame = 0;
  BBox box;
  double visibility = 1.0;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
  double score = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // one per detection, descending score
  double ap = std::numeric_limits<double>::quiet_NaN();
  size_t num_gt = 0;
  size_t num_det = 0;
};

// All-point average precision for one class.
//
// Matching: detections sorted by descending score (stable, so equal scores
// keep input order); each detection greedily takes the highest-IoU unmatched
// GT in its frame (lowest GT index on ties) and is a TP if that IoU clears
// iou_thresh, otherwise an FP. Each GT matches at most once.
//
// Area: with cumulative points (r_k, p_k), p_env_k = max(p_k..p_N), and
// ap = sum over k ascending of (r_k - r_{k-1}) * p_env_k, r_0 = 0. This
// exact summation order is part of the contract; the threshold-sweep oracle
// in the tests reproduces it term by term.
//
// No GT at all -> ap = NaN (callers exclude NaN classes from mAP);
// no detections but some GT -> ap = 0.
PrCurve average_precision(const std::vector<EvalDet>& dets, const std::vector<EvalGt>& gts,
                          double iou_thresh = 0.5);

// Mean of the finite per-class APs; NaN when every class is NaN.
double mean_ap(const std::vector<double>& per_class_ap);

struct VisibilityBin {
  double lo = 0.0, hi = 1.0;  // [lo, hi), last bin closed at 1.0
  size_t total = 0;
  size_t matched = 0;
  bool populated() const { return total > 0; }
  double recall() const {
    return populated() ? static_cast<double>(matched) / static_cast<double>(total)
                       : std::numeric_limits<double>::quiet_NaN();
  }
};

// Recall of GT boxes per visibility bin {[0,0.3), [0.3,0.7), [0.7,1.0]},
// counting a GT as found when some detection with score >= score_thresh
// matches it under the same greedy matching as average_precision.
std::vector<VisibilityBin> stratified_recall(const std::vector<EvalDet>& dets,
                                             const std::vector<EvalGt>& gts,
                                             double score_thresh = 0.5,
                                             double iou_thresh = 0.5);

}  // namespace blendnet
