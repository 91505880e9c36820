#include "blendnet/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "blendnet/annotations.hpp"
#include "blendnet/common.hpp"

namespace blendnet {

std::vector<double> bilinear_resize(const std::vector<double>& src, size_t sh, size_t sw,
                                    size_t dh, size_t dw) {
  std::vector<double> dst(dh * dw);
  double ry = static_cast<double>(sh) / static_cast<double>(dh);
  double rx = static_cast<double>(sw) / static_cast<double>(dw);
  for (size_t y = 0; y < dh; ++y) {
    double fy = (static_cast<double>(y) + 0.5) * ry - 0.5;
    double cy = std::clamp(fy, 0.0, static_cast<double>(sh - 1));
    size_t y0 = static_cast<size_t>(cy);
    size_t y1 = std::min(y0 + 1, sh - 1);
    double wy = cy - static_cast<double>(y0);
    for (size_t x = 0; x < dw; ++x) {
      double fx = (static_cast<double>(x) + 0.5) * rx - 0.5;
      double cx = std::clamp(fx, 0.0, static_cast<double>(sw - 1));
      size_t x0 = static_cast<size_t>(cx);
      size_t x1 = std::min(x0 + 1, sw - 1);
      double wx = cx - static_cast<double>(x0);
      double top = src[y0 * sw + x0] * (1.0 - wx) + src[y0 * sw + x1] * wx;
      double bot = src[y1 * sw + x0] * (1.0 - wx) + src[y1 * sw + x1] * wx;
      dst[y * dw + x] = top * (1.0 - wy) + bot * wy;
    }
  }
  return dst;
}

namespace {

void draw_box(std::vector<uint8_t>& img, size_t w, size_t h, const BBox& b, uint8_t value) {
  auto px = [&](long long x, long long y) {
    if (x < 0 || y < 0 || x >= static_cast<long long>(w) || y >= static_cast<long long>(h)) return;
    img[static_cast<size_t>(y) * w + static_cast<size_t>(x)] = value;
  };
  auto x0 = static_cast<long long>(std::llround(b.x0));
  auto y0 = static_cast<long long>(std::llround(b.y0));
  auto x1 = static_cast<long long>(std::llround(b.x1));
  auto y1 = static_cast<long long>(std::llround(b.y1));
  for (long long x = x0; x <= x1; ++x) {
    px(x, y0);
    px(x, y1);
  }
  for (long long y = y0; y <= y1; ++y) {
    px(x0, y);
    px(x1, y);
  }
}

}  // namespace

VisualizeResult visualize_attention(const Model& model, const VideoClip& clip, int center,
                                    const EvalOptions& opt, const std::string& out_dir) {
  check(model.config().blend.order != BlendOrder::None, "no attention to visualize");
  check(model.has_tcm(), "no temporal attention to visualize under blend order ",
        to_string(model.config().blend.order));
  check(center >= 0 && static_cast<size_t>(center) < clip.num_frames(),
        "frame index out of range for clip " + clip.id);
  std::filesystem::create_directories(out_dir);

  LetterboxTransform tf =
      letterbox_plan(clip.height, clip.width, opt.target_short, opt.pad_multiple);

  int tau = static_cast<int>((opt.t_test - 1) / 2);
  int last = static_cast<int>(clip.num_frames()) - 1;
  std::vector<Tensor> frames;
  std::vector<int> offsets;
  for (int k = -tau; k <= tau; ++k) {
    int idx = std::clamp(center + opt.sample_stride * k, 0, last);
    std::vector<double> img = letterbox_frame(clip.frames[static_cast<size_t>(idx)], clip.channels,
                                              clip.height, clip.width, tf);
    frames.push_back(Tensor::from_data({clip.channels, tf.out_h, tf.out_w}, std::move(img)));
    offsets.push_back(opt.sample_stride * k);
  }

  VisualizeResult result;
  std::vector<Tensor> maps = model.attention_maps(frames, static_cast<size_t>(tau));
  check(maps.size() == frames.size(), "attention map count mismatch");

  for (size_t i = 0; i < maps.size(); ++i) {
    const auto& shape = maps[i].shape();
    check(shape.size() == 2, "attention map must be 2-D, got ", shape_str(shape));
    size_t sh = shape[0], sw = shape[1];

    // Back-project to the original frame: site grid covers the padded
    // canvas, so resize to the canvas first, then crop the content region
    // and undo the letterbox scale.
    std::vector<double> canvas = bilinear_resize(maps[i].values(), sh, sw, tf.out_h, tf.out_w);
    std::vector<double> content(tf.content_h * tf.content_w);
    for (size_t y = 0; y < tf.content_h; ++y)
      for (size_t x = 0; x < tf.content_w; ++x) content[y * tf.content_w + x] = canvas[y * tf.out_w + x];
    std::vector<double> full = (tf.content_h == clip.height && tf.content_w == clip.width)
                                   ? std::move(content)
                                   : bilinear_resize(content, tf.content_h, tf.content_w,
                                                     clip.height, clip.width);

    double lo = full[0], hi = full[0];
    for (double v : full) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    double span = hi - lo;
    std::vector<uint8_t> px(full.size(), 0);
    if (span > 1e-12 * std::max(1.0, std::fabs(hi))) {
      for (size_t p = 0; p < full.size(); ++p)
        px[p] = static_cast<uint8_t>(std::llround(255.0 * (full[p] - lo) / span));
    } else {
      ++result.flat_maps;
    }
    std::string path = out_dir + "/attn_" + clip.id + "_" + std::to_string(center) + "_" +
                       std::to_string(offsets[i]) + ".pgm";
    write_pgm(px, clip.width, clip.height, path);
    result.attention_files.push_back(path);
  }

  std::vector<Model::SiteFeatures> sites(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) sites[i] = model.backbone_to_site(frames[i]);
  Pyramid pyr = model.pyramid_from_sites(sites, static_cast<size_t>(tau));
  std::vector<Detection> dets = model.detect(pyr, tf.content_w, tf.content_h);

  const std::vector<double>& raw = clip.frames[static_cast<size_t>(center)];
  std::vector<uint8_t> frame_px(clip.height * clip.width);
  for (size_t p = 0; p < frame_px.size(); ++p)
    frame_px[p] = static_cast<uint8_t>(std::llround(255.0 * std::clamp(raw[p], 0.0, 1.0)));
  for (const GtBox& g : clip.boxes[static_cast<size_t>(center)])
    draw_box(frame_px, clip.width, clip.height, g.box, 0);
  for (const Detection& d : dets)
    draw_box(frame_px, clip.width, clip.height, letterbox_invert(d.box, tf), 255);

  result.frame_file =
      out_dir + "/frame_" + clip.id + "_" + std::to_string(center) + ".pgm";
  write_pgm(frame_px, clip.width, clip.height, result.frame_file);
  return result;
}

}  // namespace blendnet
