#pragma once

#include <array>

namespace blendnet {

// Axis-aligned box in pixel coordinates, corners (x0,y0) top-left and
// (x1,y1) bottom-right, exclusive of nothing: width = x1 - x0.
struct BBox {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double w() const { return x1 - x0; }
  double h() const { return y1 - y0; }
  double area() const { return w() * h(); }
  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }
  bool valid() const { return x1 > x0 && y1 > y0; }
};

// Intersection over union in [0,1]; 0 for disjoint boxes. Degenerate
// (zero-extent or inverted) boxes are an error.
double iou(const BBox& a, const BBox& b);

// Standard log-space box offsets relative to an anchor:
//   dx = (gcx - acx) / aw,  dy = (gcy - acy) / ah,
//   dw = ln(gw / aw),       dh = ln(gh / ah)
std::array<double, 4> encode_box(const BBox& anchor, const BBox& gt);
BBox decode_box(const BBox& anchor, const std::array<double, 4>& d);

}  // namespace blendnet
