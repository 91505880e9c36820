#pragma once

#include <string>
#include <vector>

#include "blendnet/evaluator.hpp"
#include "blendnet/model.hpp"
#include "blendnet/video.hpp"

namespace blendnet {

// Half-pixel-centered bilinear resize of one plane; the attention-map
// back-projection path (and nothing on the training path) runs through it.
std::vector<double> bilinear_resize(const std::vector<double>& src, size_t sh, size_t sw,
                                    size_t dh, size_t dw);

struct VisualizeResult {
  std::vector<std::string> attention_files;  // one per supporting frame
  std::string frame_file;                    // center frame with boxes burned in
  size_t flat_maps = 0;                      // constant maps written as all-zero images
};

// Writes attn_<clip>_<center>_<offset>.pgm for every supporting frame of the
// window around `center`, plus frame_<clip>_<center>.pgm with predicted
// (white) and ground-truth (black) boxes. Attention maps are bilinearly
// projected back to image resolution and min-max scaled; a constant map has
// no contrast to show, so it is written as all zeros and counted in
// flat_maps.
VisualizeResult visualize_attention(const Model& model, const VideoClip& clip, int center,
                                    const EvalOptions& opt, const std::string& out_dir);

}  // namespace blendnet
