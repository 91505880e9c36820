#include <cmath>
#include <vector>

#include <doctest.h>

#include "blendnet/anchors.hpp"
#include "blendnet/boxes.hpp"
#include "blendnet/common.hpp"

using namespace blendnet;

TEST_CASE("iou frozen example 1/7") {
  BBox a{0, 0, 2, 2}, b{1, 1, 3, 3};
  CHECK(iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou(b, a) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("iou of identical boxes is one, disjoint is zero") {
  BBox a{3, 4, 10, 12};
  CHECK(iou(a, a) == 1.0);
  BBox far{100, 100, 110, 110};
  CHECK(iou(a, far) == 0.0);
  BBox touching{10, 4, 17, 12};  // shares only an edge
  CHECK(iou(a, touching) == 0.0);
}

TEST_CASE("iou rejects degenerate boxes") {
  BBox ok{0, 0, 2, 2};
  CHECK_THROWS_AS(iou(ok, BBox{1, 1, 1, 5}), Error);   // zero width
  CHECK_THROWS_AS(iou(BBox{5, 0, 2, 2}, ok), Error);   // inverted
}

TEST_CASE("encode of the anchor itself is all zeros and decode inverts") {
  BBox anchor{10, 20, 42, 60};
  auto d = encode_box(anchor, anchor);
  for (double v : d) CHECK(std::fabs(v) < 1e-15);
  BBox back = decode_box(anchor, {0, 0, 0, 0});
  CHECK(back.x0 == doctest::Approx(anchor.x0).epsilon(1e-12));
  CHECK(back.y1 == doctest::Approx(anchor.y1).epsilon(1e-12));
}

TEST_CASE("encode then decode round trips below 1e-9") {
  BBox anchor{16, 16, 48, 48};
  std::vector<BBox> gts{{10, 12, 50, 44}, {30, 30, 31.5, 33}, {0, 0, 100, 100}};
  for (const BBox& gt : gts) {
    BBox back = decode_box(anchor, encode_box(anchor, gt));
    CHECK(std::fabs(back.x0 - gt.x0) < 1e-9);
    CHECK(std::fabs(back.y0 - gt.y0) < 1e-9);
    CHECK(std::fabs(back.x1 - gt.x1) < 1e-9);
    CHECK(std::fabs(back.y1 - gt.y1) < 1e-9);
  }
}

TEST_CASE("anchor grid enumerates h * w * 9 boxes per level") {
  AnchorSpec spec;
  auto levels = generate_anchors({{8, 8}, {4, 4}, {2, 2}, {1, 1}, {1, 1}}, spec);
  REQUIRE(levels.size() == 5);
  CHECK(levels[0].level == 3);
  CHECK(levels[0].stride == 8);
  CHECK(levels[4].stride == 128);
  for (const auto& lv : levels) CHECK(lv.boxes.size() == lv.h * lv.w * 9);
  CHECK(total_anchor_count(levels) == (64 + 16 + 4 + 1 + 1) * 9);
}

TEST_CASE("unit-ratio unit-scale anchor is the base side centered on the cell") {
  AnchorSpec spec;
  auto levels = generate_anchors({{4, 4}}, spec);
  // Anchor order per location is (ratio, scale); ratio 1.0 is index 1,
  // scale 1.0 is index 0, so flat index 3 of the first cell.
  const BBox& a = levels[0].boxes[3];
  CHECK(a.w() == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(a.h() == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(a.cx() == doctest::Approx(4.0).epsilon(1e-12));  // stride 8, cell center at stride/2
  CHECK(a.cy() == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("aspect ratios preserve anchor area") {
  AnchorSpec spec;
  auto levels = generate_anchors({{2, 2}}, spec);
  // First location, scale index 0, ratios 0.5 / 1.0 / 2.0 at flat 0, 3, 6.
  double a0 = levels[0].boxes[0].area();
  double a1 = levels[0].boxes[3].area();
  double a2 = levels[0].boxes[6].area();
  CHECK(std::fabs(a0 - a1) < 1e-9 * a1);
  CHECK(std::fabs(a2 - a1) < 1e-9 * a1);
  double r = levels[0].boxes[6].w() / levels[0].boxes[6].h();
  CHECK(r == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("scaled_to shrinks base sides proportionally") {
  AnchorSpec spec;
  AnchorSpec small = spec.scaled_to(64.0);
  CHECK(small.base_sides[0] == doctest::Approx(32.0 * 64.0 / 512.0).epsilon(1e-12));
  CHECK(small.base_sides[4] == doctest::Approx(512.0 * 64.0 / 512.0).epsilon(1e-12));
  CHECK(small.scales == spec.scales);
}

TEST_CASE("assign_targets labels an exactly matching anchor foreground with zero deltas") {
  std::vector<BBox> anchors{{10, 10, 40, 40}, {100, 100, 130, 130}};
  std::vector<GtBox> gts{{{10, 10, 40, 40}, 0, 1.0}};
  DetectionTargets t = assign_targets(anchors, gts);
  REQUIRE(t.labels.size() == 2);
  CHECK(t.labels[0] == 0);
  CHECK(t.labels[1] == kBackground);
  CHECK(t.num_fg == 1);
  for (double v : t.deltas[0]) CHECK(std::fabs(v) < 1e-15);
}

TEST_CASE("assign_targets with no ground truth is all background") {
  std::vector<BBox> anchors{{0, 0, 10, 10}, {5, 5, 20, 20}};
  DetectionTargets t = assign_targets(anchors, {});
  for (int32_t l : t.labels) CHECK(l == kBackground);
  CHECK(t.num_fg == 0);
}

TEST_CASE("low-iou anchor is background unless rescued as the best one") {
  // IoU((0,0,2,2),(1,1,3,3)) = 1/7 < bg threshold.
  std::vector<BBox> anchors{{0, 0, 2, 2}};
  std::vector<GtBox> gts{{{1, 1, 3, 3}, 2, 1.0}};
  DetectionTargets t = assign_targets(anchors, gts);
  // Sole anchor: the per-GT argmax rescue claims it despite the low IoU.
  CHECK(t.labels[0] == 2);
  CHECK(t.num_fg == 1);

  // Add a better anchor; the low-IoU one drops back to background.
  anchors.push_back({1, 1, 3, 3});
  t = assign_targets(anchors, gts);
  CHECK(t.labels[0] == kBackground);
  CHECK(t.labels[1] == 2);
}

TEST_CASE("mid-band iou anchors are ignored") {
  // vs the GT: anchor 0 IoU 1.0 (fg, also the argmax), anchor 1 IoU
  // 60/140 = 0.4286 (between bg 0.4 and fg 0.5), anchor 2 disjoint.
  std::vector<BBox> anchors{{0, 0, 10, 10}, {0, 4, 10, 14}, {50, 50, 60, 60}};
  std::vector<GtBox> gts{{{0, 0, 10, 10}, 1, 1.0}};
  DetectionTargets t = assign_targets(anchors, gts);
  CHECK(t.labels[0] == 1);
  CHECK(t.labels[1] == kIgnore);
  CHECK(t.labels[2] == kBackground);
  CHECK(t.num_fg == 1);
}

TEST_CASE("iou ties in the rescue go to the lowest anchor index") {
  std::vector<BBox> anchors{{0, 0, 4, 4}, {0, 0, 4, 4}};
  std::vector<GtBox> gts{{{10, 10, 14, 14}, 3, 1.0}};
  DetectionTargets t = assign_targets(anchors, gts);
  CHECK(t.labels[0] == 3);
  CHECK(t.labels[1] == kBackground);
}

TEST_CASE("later gt overrides an earlier rescue on the same anchor") {
  std::vector<BBox> anchors{{0, 0, 4, 4}};
  std::vector<GtBox> gts{{{0, 0, 4, 4}, 0, 1.0}, {{0, 0, 4, 5}, 1, 1.0}};
  DetectionTargets t = assign_targets(anchors, gts);
  CHECK(t.labels[0] == 1);
}
