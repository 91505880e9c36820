#include "blendnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blendnet/common.hpp"

namespace blendnet {
namespace {

std::vector<size_t> score_order(const std::vector<EvalDet>& dets) {
  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

// Walks detections in scoring order and flags each as TP (with the matched
// GT index) or FP. Shared by AP and the stratified report so both use one
// matching rule.
std::vector<int64_t> greedy_match(const std::vector<EvalDet>& dets,
                                  const std::vector<size_t>& order,
                                  const std::vector<EvalGt>& gts, double iou_thresh) {
  std::vector<int64_t> matched_gt(dets.size(), -1);
  std::vector<uint8_t> taken(gts.size(), 0);
  for (size_t idx : order) {
    double best = -1.0;
    int64_t best_g = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].frame != dets[idx].frame) continue;
      const double v = iou(dets[idx].box, gts[g].box);
      if (v > best) {
        best = v;
        best_g = static_cast<int64_t>(g);
      }
    }
    if (best_g >= 0 && best >= iou_thresh) {
      matched_gt[idx] = best_g;
      taken[static_cast<size_t>(best_g)] = 1;
    }
  }
  return matched_gt;
}

}  // namespace

PrCurve average_precision(const std::vector<EvalDet>& dets, const std::vector<EvalGt>& gts,
                          double iou_thresh) {
  PrCurve curve;
  curve.num_gt = gts.size();
  curve.num_det = dets.size();
  if (gts.empty()) return curve;  // ap stays NaN
  if (dets.empty()) {
    curve.ap = 0.0;
    return curve;
  }

  const std::vector<size_t> order = score_order(dets);
  const std::vector<int64_t> matched = greedy_match(dets, order, gts, iou_thresh);

  size_t tp = 0;
  curve.points.reserve(dets.size());
  for (size_t k = 0; k < order.size(); ++k) {
    if (matched[order[k]] >= 0) ++tp;
    PrPoint pt;
    pt.recall = static_cast<double>(tp) / static_cast<double>(gts.size());
    pt.precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    pt.score = dets[order[k]].score;
    curve.points.push_back(pt);
  }

  std::vector<double> env(curve.points.size());
  double running = 0.0;
  for (size_t k = curve.points.size(); k-- > 0;) {
    running = std::max(running, curve.points[k].precision);
    env[k] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (size_t k = 0; k < curve.points.size(); ++k) {
    ap += (curve.points[k].recall - prev_recall) * env[k];
    prev_recall = curve.points[k].recall;
  }
  curve.ap = ap;
  return curve;
}

double mean_ap(const std::vector<double>& per_class_ap) {
  double sum = 0.0;
  size_t n = 0;
  for (double ap : per_class_ap) {
    if (std::isnan(ap)) continue;
    sum += ap;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

std::vector<VisibilityBin> stratified_recall(const std::vector<EvalDet>& dets,
                                             const std::vector<EvalGt>& gts, double score_thresh,
                                             double iou_thresh) {
  std::vector<VisibilityBin> bins{{0.0, 0.3}, {0.3, 0.7}, {0.7, 1.0}};
  auto bin_of = [&](double vis) -> VisibilityBin& {
    for (size_t b = 0; b + 1 < bins.size(); ++b)
      if (vis < bins[b].hi) return bins[b];
    return bins.back();
  };

  std::vector<EvalDet> confident;
  for (const EvalDet& d : dets)
    if (d.score >= score_thresh) confident.push_back(d);
  const std::vector<size_t> order = score_order(confident);
  const std::vector<int64_t> matched = greedy_match(confident, order, gts, iou_thresh);

  std::vector<uint8_t> found(gts.size(), 0);
  for (int64_t g : matched)
    if (g >= 0) found[static_cast<size_t>(g)] = 1;
  for (size_t g = 0; g < gts.size(); ++g) {
    VisibilityBin& bin = bin_of(gts[g].visibility);
    ++bin.total;
    if (found[g]) ++bin.matched;
  }
  return bins;
}

}  // namespace blendnet
