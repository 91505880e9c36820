#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "blendnet/anchors.hpp"
#include "blendnet/rng.hpp"
#include "blendnet/tensor.hpp"

namespace blendnet {

// A clip holds planar C*H*W frames (doubles in [0,1] for synthetic data)
// plus per-frame ground truth.
struct VideoClip {
  std::string id;
  size_t channels = 1;
  size_t height = 0;
  size_t width = 0;
  std::vector<std::vector<double>> frames;
  std::vector<std::vector<GtBox>> boxes;  // one list per frame

  size_t num_frames() const { return frames.size(); }
};

// T consecutive (strided) frames around a center, edge-clamped at clip
// boundaries, with the ground truth of every sampled frame.
struct SnippetBatch {
  int center = 0;
  int stride = 1;
  size_t channels = 1;
  size_t height = 0;
  size_t width = 0;
  std::vector<std::vector<double>> frames;  // length T
  std::vector<std::vector<GtBox>> boxes;

  size_t t() const { return frames.size(); }
  size_t main_index() const { return frames.size() / 2; }
};

// Frame indices center + stride*k for k in [-tau, tau], clamped into range.
SnippetBatch sample_snippet(const VideoClip& clip, int center, size_t T, int stride);

// Sequence-based augmentation: one draw per snippet, applied to all frames.
// Draw order (fixed): brightness U(0.7,1.3), flip p=0.5, crop-x fraction
// U(0,0.1), crop-y fraction U(0,0.1). The central crop removes an integer
// pixel count per side; boxes shrunk below 2 px extent are dropped.
SnippetBatch augment(const SnippetBatch& in, uint64_t seed);

struct LetterboxTransform {
  double scale = 1.0;
  size_t content_w = 0, content_h = 0;  // image extent before padding
  size_t out_w = 0, out_h = 0;          // padded extent
};

// Isotropic resize so the short side equals target_short exactly (half-pixel
// centered bilinear), then zero padding on the right/bottom up to a multiple
// of pad_multiple. An already-square image at target size passes through
// bit-identically.
LetterboxTransform letterbox_plan(size_t h, size_t w, size_t target_short, size_t pad_multiple);

std::vector<double> letterbox_frame(const std::vector<double>& img, size_t c, size_t h, size_t w,
                                    const LetterboxTransform& t);

BBox letterbox_box(const BBox& b, const LetterboxTransform& t);
BBox letterbox_invert(const BBox& b, const LetterboxTransform& t);

// Letterboxes every frame of a snippet into model-ready tensors and maps the
// ground truth of the main frame along. Frames in a snippet share one size,
// hence one transform.
struct ModelInput {
  std::vector<Tensor> frames;
  std::vector<GtBox> main_gt;
  LetterboxTransform transform;
};
ModelInput prepare_input(const SnippetBatch& snippet, size_t target_short, size_t pad_multiple);

}  // namespace blendnet
