#include "blendnet/annotations.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "blendnet/common.hpp"

namespace fs = std::filesystem;

namespace blendnet {
namespace {

constexpr char kVidMagic[8] = {'B', 'L', 'N', 'D', 'V', 'I', 'D', '1'};
constexpr const char* kIndexName = "dataset_index.txt";

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t read_u32(std::istream& is, const std::string& path) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  check(is.good(), "truncated header in ", path);
  return v;
}

}  // namespace

void save_clip_annotations(const VideoClip& clip, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  check(os.is_open(), "annotations: cannot open ", path, " for writing");
  os << "#blendnet-ann v1 " << clip.id << " " << clip.width << " " << clip.height << " "
     << clip.boxes.size() << "\n";
  char line[256];
  for (size_t t = 0; t < clip.boxes.size(); ++t) {
    for (const GtBox& g : clip.boxes[t]) {
      std::snprintf(line, sizeof line, "%zu %.2f %.2f %.2f %.2f %d %.2f\n", t, g.box.x0, g.box.y0,
                    g.box.x1, g.box.y1, g.cls, g.visibility);
      os << line;
    }
  }
  check(os.good(), "annotations: write failed for ", path);
}

VideoClip load_clip_annotations(const std::string& path) {
  std::ifstream is(path);
  check(is.is_open(), "annotations: cannot open ", path);
  std::string header;
  check(static_cast<bool>(std::getline(is, header)), "annotations: empty file ", path);

  VideoClip clip;
  size_t num_frames = 0;
  {
    std::istringstream hs(header);
    std::string magic, version;
    hs >> magic >> version >> clip.id >> clip.width >> clip.height >> num_frames;
    check(!hs.fail() && magic == "#blendnet-ann" && version == "v1",
          "annotations: bad header in ", path, ": ", header);
  }
  clip.channels = 1;
  clip.boxes.assign(num_frames, {});

  std::string line;
  size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    size_t frame = 0;
    GtBox g;
    ls >> frame >> g.box.x0 >> g.box.y0 >> g.box.x1 >> g.box.y1 >> g.cls >> g.visibility;
    check(!ls.fail(), "annotations: malformed line ", line_no, " in ", path, ": ", line);
    std::string extra;
    check(!(ls >> extra), "annotations: trailing fields on line ", line_no, " in ", path);
    check(frame < num_frames, "annotations: frame index ", frame, " out of range on line ",
          line_no, " in ", path);
    const double wd = static_cast<double>(clip.width);
    const double hd = static_cast<double>(clip.height);
    if (g.box.x0 < 0 || g.box.y0 < 0 || g.box.x1 > wd || g.box.y1 > hd) {
      std::cerr << "warning: " << path << ":" << line_no << ": box outside " << clip.width << "x"
                << clip.height << " image, clamping\n";
      g.box.x0 = std::clamp(g.box.x0, 0.0, wd);
      g.box.x1 = std::clamp(g.box.x1, 0.0, wd);
      g.box.y0 = std::clamp(g.box.y0, 0.0, hd);
      g.box.y1 = std::clamp(g.box.y1, 0.0, hd);
    }
    clip.boxes[frame].push_back(g);
  }
  return clip;
}

void save_clip_frames(const VideoClip& clip, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.is_open(), "frames: cannot open ", path, " for writing");
  os.write(kVidMagic, sizeof kVidMagic);
  write_u32(os, static_cast<uint32_t>(clip.channels));
  write_u32(os, static_cast<uint32_t>(clip.height));
  write_u32(os, static_cast<uint32_t>(clip.width));
  write_u32(os, static_cast<uint32_t>(clip.frames.size()));
  const size_t plane = clip.channels * clip.height * clip.width;
  for (const auto& f : clip.frames) {
    check(f.size() == plane, "frames: frame size mismatch in clip ", clip.id);
    os.write(reinterpret_cast<const char*>(f.data()),
             static_cast<std::streamsize>(plane * sizeof(double)));
  }
  check(os.good(), "frames: write failed for ", path);
}

void load_clip_frames(VideoClip& clip, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.is_open(), "frames: cannot open ", path);
  char magic[8];
  is.read(magic, sizeof magic);
  check(is.good() && std::memcmp(magic, kVidMagic, sizeof magic) == 0, "frames: bad magic in ",
        path);
  const size_t c = read_u32(is, path);
  const size_t h = read_u32(is, path);
  const size_t w = read_u32(is, path);
  const size_t t = read_u32(is, path);
  check(c == clip.channels && h == clip.height && w == clip.width,
        "frames: geometry ", c, "x", h, "x", w, " in ", path, " does not match annotations ",
        clip.channels, "x", clip.height, "x", clip.width);
  check(t == clip.boxes.size(), "frames: ", t, " frames in ", path, " but ", clip.boxes.size(),
        " annotated");
  clip.frames.assign(t, std::vector<double>(c * h * w));
  for (auto& f : clip.frames) {
    is.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(double)));
    check(!is.fail(), "frames: truncated data in ", path);
  }
}

void save_dataset(const std::vector<VideoClip>& clips, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream idx(fs::path(dir) / kIndexName, std::ios::trunc);
  check(idx.is_open(), "dataset: cannot write index in ", dir);
  for (const VideoClip& c : clips) {
    check(!c.id.empty(), "dataset: clip with empty id");
    save_clip_annotations(c, (fs::path(dir) / (c.id + ".ann.txt")).string());
    save_clip_frames(c, (fs::path(dir) / (c.id + ".frames.f64")).string());
    idx << c.id << "\n";
  }
  check(idx.good(), "dataset: index write failed in ", dir);
}

std::vector<VideoClip> load_dataset(const std::string& dir) {
  std::ifstream idx(fs::path(dir) / kIndexName);
  check(idx.is_open(), "dataset: no ", kIndexName, " in ", dir,
        " (not a generated dataset directory?)");
  std::vector<VideoClip> clips;
  std::string id;
  while (std::getline(idx, id)) {
    if (id.empty()) continue;
    VideoClip c = load_clip_annotations((fs::path(dir) / (id + ".ann.txt")).string());
    load_clip_frames(c, (fs::path(dir) / (id + ".frames.f64")).string());
    clips.push_back(std::move(c));
  }
  check(!clips.empty(), "dataset: empty index in ", dir);
  return clips;
}

void save_results(const std::vector<Detection>& dets, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  check(os.is_open(), "results: cannot open ", path, " for writing");
  char line[512];
  for (const Detection& d : dets) {
    check(!d.clip_id.empty(), "results: detection with empty clip id");
    std::snprintf(line, sizeof line, "%s %d %.17g %.17g %.17g %.17g %d %.17g\n",
                  d.clip_id.c_str(), d.frame_idx, d.box.x0, d.box.y0, d.box.x1, d.box.y1, d.cls,
                  d.score);
    os << line;
  }
  check(os.good(), "results: write failed for ", path);
}

std::vector<Detection> load_results(const std::string& path) {
  std::ifstream is(path);
  check(is.is_open(), "results: cannot open ", path);
  std::vector<Detection> dets;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Detection d;
    ls >> d.clip_id >> d.frame_idx >> d.box.x0 >> d.box.y0 >> d.box.x1 >> d.box.y1 >> d.cls >>
        d.score;
    check(!ls.fail(), "results: malformed line ", line_no, " in ", path, ": ", line);
    dets.push_back(std::move(d));
  }
  return dets;
}

void write_pgm(const std::vector<uint8_t>& pixels, size_t w, size_t h, const std::string& path) {
  check(pixels.size() == w * h, "pgm: pixel count ", pixels.size(), " does not match ", w, "x", h);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.is_open(), "pgm: cannot open ", path, " for writing");
  os << "P5\n" << w << " " << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  check(os.good(), "pgm: write failed for ", path);
}

std::vector<uint8_t> read_pgm(const std::string& path, size_t& w, size_t& h) {
  std::ifstream is(path, std::ios::binary);
  check(is.is_open(), "pgm: cannot open ", path);
  std::string magic;
  size_t maxval = 0;
  is >> magic >> w >> h >> maxval;
  check(!is.fail() && magic == "P5" && maxval == 255, "pgm: unsupported header in ", path);
  is.get();  // the single whitespace after maxval
  std::vector<uint8_t> pixels(w * h);
  is.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  check(!is.fail(), "pgm: truncated data in ", path);
  return pixels;
}

}  // namespace blendnet
