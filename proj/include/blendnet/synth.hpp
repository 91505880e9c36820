#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blendnet/video.hpp"

namespace blendnet {

// Deterministic synthetic occluded-video benchmark: dark textured ellipses
// drifting on a textured background behind static vertical occluder strips,
// under a global brightness random walk and per-pixel hash speckle. Ground
// truth always covers the full object extent, with the unoccluded fraction
// recorded per frame as visibility.
struct SynthConfig {
  size_t num_clips = 40;
  size_t frames_per_clip = 40;
  size_t image_size = 64;  // square frames
  size_t min_objects = 1;
  size_t max_objects = 3;
  double occluder_density = 0.35;  // fraction of image width under strips
  double lighting_jitter = 0.05;   // per-frame brightness walk step
  double contrast = 0.35;          // object darkness below the background
  double walk_speed = 1.0;         // object drift scale, px/frame
  double noise = 0.03;             // speckle amplitude
  uint64_t seed = 1;
  std::string clip_prefix = "clip";

  void validate() const;
};

// Clips are independent given (cfg, index): clip i draws everything from
// derive_seed(cfg.seed, "clip", i).
VideoClip generate_clip(const SynthConfig& cfg, size_t index);
std::vector<VideoClip> generate_synthetic(const SynthConfig& cfg);

// Order-independent digest of pixels, boxes, and visibility; equal configs
// must produce equal digests.
uint64_t dataset_digest(const std::vector<VideoClip>& clips);

}  // namespace blendnet
