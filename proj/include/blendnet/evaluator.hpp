#pragma once

#include <string>
#include <vector>

#include "blendnet/config.hpp"
#include "blendnet/metrics.hpp"
#include "blendnet/model.hpp"
#include "blendnet/nms.hpp"
#include "blendnet/video.hpp"

namespace blendnet {

struct EvalOptions {
  size_t t_test = 5;
  int sample_stride = 1;
  size_t target_short = 64;
  size_t pad_multiple = 16;
  double map_iou = 0.5;
  double recall_score = 0.5;
};

EvalOptions eval_options(const RunConfig& cfg);

struct EvalReport {
  std::vector<PrCurve> curves;       // one per class
  double map = 0.0;                  // NaN-excluding mean of per-class AP
  std::vector<VisibilityBin> recall_bins;
  size_t num_frames = 0;
  size_t num_gt = 0;
  size_t num_dets = 0;
  std::vector<Detection> detections;  // original image coordinates
};

// Runs detection on every frame of every clip, using t_test support frames
// around each center. Backbone features up to the blend site are computed
// once per frame and reused across the windows that touch it; clips are
// processed in parallel but merged in clip order, so the report does not
// depend on the thread count.
EvalReport evaluate_clips(const Model& model, const std::vector<VideoClip>& clips,
                          const EvalOptions& opt);

std::string format_eval_report(const EvalReport& r, double map_iou, double recall_score);

// Writes results_<tag>.txt, pr_<tag>.txt and metrics_<tag>.txt under dir.
void write_eval_outputs(const EvalReport& r, const EvalOptions& opt, const std::string& dir,
                        const std::string& tag);

}  // namespace blendnet
