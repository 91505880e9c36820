#pragma once

#include <string>
#include <vector>

#include "blendnet/nms.hpp"
#include "blendnet/video.hpp"

namespace blendnet {

// One annotation file per clip:
//   #blendnet-ann v1 <clip_id> <W> <H> <num_frames>
//   <frame_idx> <x0> <y0> <x1> <y1> <class_id> <visibility>   (2-decimal floats)
// Boxes outside the image are clamped on load, with a warning per box.
void save_clip_annotations(const VideoClip& clip, const std::string& path);
VideoClip load_clip_annotations(const std::string& path);  // frames left empty

// Raw planar frame container: "BLNDVID1", u32 C,H,W,T little-endian, then
// T*C*H*W f64 values.
void save_clip_frames(const VideoClip& clip, const std::string& path);
void load_clip_frames(VideoClip& clip, const std::string& path);

// Dataset directory: <dir>/<clip_id>.ann.txt + <dir>/<clip_id>.frames.f64
// plus an index file the loader walks (record per clip).
void save_dataset(const std::vector<VideoClip>& clips, const std::string& dir);
std::vector<VideoClip> load_dataset(const std::string& dir);

// Results file, one detection per line:
//   <clip_id> <frame_idx> <x0> <y0> <x1> <y1> <class_id> <score>
// printed with %.17g so reparsing reproduces the exact doubles.
void save_results(const std::vector<Detection>& dets, const std::string& path);
std::vector<Detection> load_results(const std::string& path);

// Binary 8-bit PGM, for attention maps and frame dumps.
void write_pgm(const std::vector<uint8_t>& pixels, size_t w, size_t h, const std::string& path);
std::vector<uint8_t> read_pgm(const std::string& path, size_t& w, size_t& h);

}  // namespace blendnet
