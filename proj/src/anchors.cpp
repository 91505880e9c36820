#include "blendnet/anchors.hpp"

#include <cmath>

#include "blendnet/common.hpp"

namespace blendnet {

AnchorSpec AnchorSpec::scaled_to(double target_short) const {
  AnchorSpec out = *this;
  const double factor = target_short / 512.0;
  for (double& s : out.base_sides) s *= factor;
  return out;
}

std::vector<LevelAnchors> generate_anchors(const std::vector<std::array<size_t, 2>>& grid_sizes,
                                           const AnchorSpec& spec) {
  check(grid_sizes.size() == spec.base_sides.size(), "generate_anchors: ", grid_sizes.size(),
        " grids but ", spec.base_sides.size(), " base sides");
  std::vector<LevelAnchors> out;
  out.reserve(grid_sizes.size());
  for (size_t l = 0; l < grid_sizes.size(); ++l) {
    LevelAnchors la;
    la.level = static_cast<int>(l) + 3;
    la.stride = size_t{1} << la.level;
    la.h = grid_sizes[l][0];
    la.w = grid_sizes[l][1];
    la.boxes.reserve(la.h * la.w * spec.per_location());
    const double area = spec.base_sides[l] * spec.base_sides[l];
    for (size_t y = 0; y < la.h; ++y)
      for (size_t x = 0; x < la.w; ++x) {
        const double cx = (static_cast<double>(x) + 0.5) * static_cast<double>(la.stride);
        const double cy = (static_cast<double>(y) + 0.5) * static_cast<double>(la.stride);
        for (double ar : spec.ratios)
          for (double s : spec.scales) {
            const double h = s * std::sqrt(area / ar);
            const double w = ar * h;
            la.boxes.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
          }
      }
    out.push_back(std::move(la));
  }
  return out;
}

size_t total_anchor_count(const std::vector<LevelAnchors>& levels) {
  size_t n = 0;
  for (const auto& l : levels) n += l.boxes.size();
  return n;
}

DetectionTargets assign_targets(const std::vector<BBox>& anchors, const std::vector<GtBox>& gts,
                                double fg_iou, double bg_iou) {
  check(bg_iou <= fg_iou, "assign_targets: bg_iou ", bg_iou, " above fg_iou ", fg_iou);
  const size_t A = anchors.size();
  DetectionTargets t;
  t.labels.assign(A, kBackground);
  t.deltas.assign(A, {0, 0, 0, 0});
  if (gts.empty()) return t;

  std::vector<double> best_gt_iou(gts.size(), -1.0);
  std::vector<size_t> best_gt_anchor(gts.size(), 0);
  for (size_t a = 0; a < A; ++a) {
    double best = -1.0;
    size_t best_g = 0;
    for (size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(anchors[a], gts[g].box);
      if (v > best) {
        best = v;
        best_g = g;
      }
      if (v > best_gt_iou[g]) {  // strict: ties keep the lowest anchor index
        best_gt_iou[g] = v;
        best_gt_anchor[g] = a;
      }
    }
    if (best >= fg_iou) {
      t.labels[a] = gts[best_g].cls;
      t.deltas[a] = encode_box(anchors[a], gts[best_g].box);
    } else if (best >= bg_iou) {
      t.labels[a] = kIgnore;
    }
  }
  // Rescue pass: every GT keeps at least its best-overlapping anchor, later
  // GTs overriding earlier claims on the same anchor.
  for (size_t g = 0; g < gts.size(); ++g) {
    const size_t a = best_gt_anchor[g];
    t.labels[a] = gts[g].cls;
    t.deltas[a] = encode_box(anchors[a], gts[g].box);
  }
  for (int32_t l : t.labels)
    if (l >= 0) ++t.num_fg;
  return t;
}

}  // namespace blendnet
