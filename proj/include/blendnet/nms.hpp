#pragma once

#include <string>
#include <vector>

#include "blendnet/boxes.hpp"

namespace blendnet {

struct Detection {
  std::string clip_id;
  int frame_idx = 0;
  BBox box;
  int cls = 0;
  double score = 0.0;
};

// Greedy per-class suppression: walk detections by descending score (ties by
// lower input index), keep the current one, drop everything later whose IoU
// with a kept box exceeds iou_thresh strictly. Input order is otherwise
// irrelevant; output is sorted by descending score.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh = 0.5);

}  // namespace blendnet
