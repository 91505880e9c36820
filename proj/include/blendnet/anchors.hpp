#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "blendnet/boxes.hpp"

namespace blendnet {

// Anchor layout shared by generation, target assignment, and the detection
// head: levels P3..P7 in order, and within a level anchors enumerate as
// (y, x, ratio, scale) with ratios {0.5, 1, 2} and scales {2^0, 2^1/3, 2^2/3}.
struct AnchorSpec {
  std::vector<double> base_sides{32, 64, 128, 256, 512};  // P3..P7 at 512-pixel inputs
  std::vector<double> scales{1.0, 1.2599210498948732, 1.5874010519681994};
  std::vector<double> ratios{0.5, 1.0, 2.0};  // w/h

  size_t per_location() const { return scales.size() * ratios.size(); }
  // Base sides shrink proportionally with the input short side.
  AnchorSpec scaled_to(double target_short) const;
};

struct LevelAnchors {
  int level = 3;          // pyramid level id
  size_t stride = 8;      // nominal downsampling factor 2^level
  size_t h = 0, w = 0;    // feature-grid extent
  std::vector<BBox> boxes;  // h * w * per_location() anchors
};

// One entry per pyramid level; (h,w) must match the actual feature tensors.
std::vector<LevelAnchors> generate_anchors(const std::vector<std::array<size_t, 2>>& grid_sizes,
                                           const AnchorSpec& spec);

size_t total_anchor_count(const std::vector<LevelAnchors>& levels);

struct GtBox {
  BBox box;
  int cls = 0;
  double visibility = 1.0;
};

// Per-anchor labels: class id >= 0 foreground, kBackground, or kIgnore.
constexpr int32_t kBackground = -1;
constexpr int32_t kIgnore = -2;

struct DetectionTargets {
  std::vector<int32_t> labels;
  std::vector<std::array<double, 4>> deltas;  // meaningful only where label >= 0
  size_t num_fg = 0;
};

// IoU-threshold assignment with per-GT argmax rescue: an anchor is foreground
// at IoU >= fg_iou against its best GT, background below bg_iou, ignored in
// between; then each GT claims its single highest-IoU anchor (lowest anchor
// index on ties), overriding earlier labels, GTs processed in input order.
DetectionTargets assign_targets(const std::vector<BBox>& anchors, const std::vector<GtBox>& gts,
                                double fg_iou = 0.5, double bg_iou = 0.4);

}  // namespace blendnet
