#include "blendnet/boxes.hpp"

#include <algorithm>
#include <cmath>

#include "blendnet/common.hpp"

namespace blendnet {

double iou(const BBox& a, const BBox& b) {
  check(a.valid(), "iou: degenerate box (", a.x0, ",", a.y0, ",", a.x1, ",", a.y1, ")");
  check(b.valid(), "iou: degenerate box (", b.x0, ",", b.y0, ",", b.x1, ",", b.y1, ")");
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

std::array<double, 4> encode_box(const BBox& anchor, const BBox& gt) {
  check(anchor.valid() && gt.valid(), "encode_box: degenerate box");
  return {(gt.cx() - anchor.cx()) / anchor.w(), (gt.cy() - anchor.cy()) / anchor.h(),
          std::log(gt.w() / anchor.w()), std::log(gt.h() / anchor.h())};
}

BBox decode_box(const BBox& anchor, const std::array<double, 4>& d) {
  const double cx = anchor.cx() + d[0] * anchor.w();
  const double cy = anchor.cy() + d[1] * anchor.h();
  const double w = anchor.w() * std::exp(d[2]);
  const double h = anchor.h() * std::exp(d[3]);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

}  // namespace blendnet
