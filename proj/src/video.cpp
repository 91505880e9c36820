#include "blendnet/video.hpp"

#include <algorithm>
#include <cmath>

#include "blendnet/common.hpp"

namespace blendnet {

SnippetBatch sample_snippet(const VideoClip& clip, int center, size_t T, int stride) {
  check(T % 2 == 1, "sample_snippet: T must be odd, got ", T);
  check(stride >= 1, "sample_snippet: stride must be >= 1, got ", stride);
  check(clip.num_frames() > 0, "sample_snippet: empty clip ", clip.id);
  check(center >= 0 && center < static_cast<int>(clip.num_frames()),
        "sample_snippet: center ", center, " outside clip of ", clip.num_frames(), " frames");

  SnippetBatch s;
  s.center = center;
  s.stride = stride;
  s.channels = clip.channels;
  s.height = clip.height;
  s.width = clip.width;
  const int tau = static_cast<int>(T / 2);
  const int last = static_cast<int>(clip.num_frames()) - 1;
  for (int k = -tau; k <= tau; ++k) {
    const int idx = std::clamp(center + stride * k, 0, last);
    s.frames.push_back(clip.frames[static_cast<size_t>(idx)]);
    s.boxes.push_back(clip.boxes[static_cast<size_t>(idx)]);
  }
  return s;
}

SnippetBatch augment(const SnippetBatch& in, uint64_t seed) {
  Rng rng(seed);
  const double brightness = rng.uniform(0.7, 1.3);
  const bool flip = rng.bernoulli(0.5);
  const size_t crop_x = static_cast<size_t>(rng.uniform(0.0, 0.1) * static_cast<double>(in.width));
  const size_t crop_y = static_cast<size_t>(rng.uniform(0.0, 0.1) * static_cast<double>(in.height));

  SnippetBatch out;
  out.center = in.center;
  out.stride = in.stride;
  out.channels = in.channels;
  out.height = in.height - 2 * crop_y;
  out.width = in.width - 2 * crop_x;
  check(out.height > 0 && out.width > 0, "augment: crop consumed the whole frame");

  const size_t C = in.channels, H = in.height, W = in.width;
  const size_t Ho = out.height, Wo = out.width;
  for (const auto& img : in.frames) {
    std::vector<double> f(C * Ho * Wo);
    for (size_t c = 0; c < C; ++c)
      for (size_t y = 0; y < Ho; ++y)
        for (size_t x = 0; x < Wo; ++x) {
          const size_t sx = flip ? (W - 1 - (x + crop_x)) : (x + crop_x);
          f[(c * Ho + y) * Wo + x] = brightness * img[(c * H + (y + crop_y)) * W + sx];
        }
    out.frames.push_back(std::move(f));
  }

  const double wd = static_cast<double>(out.width);
  const double hd = static_cast<double>(out.height);
  for (const auto& frame_boxes : in.boxes) {
    std::vector<GtBox> mapped;
    for (GtBox g : frame_boxes) {
      BBox b = g.box;
      if (flip) b = {static_cast<double>(W) - g.box.x1, b.y0, static_cast<double>(W) - g.box.x0, b.y1};
      b.x0 = std::clamp(b.x0 - static_cast<double>(crop_x), 0.0, wd);
      b.x1 = std::clamp(b.x1 - static_cast<double>(crop_x), 0.0, wd);
      b.y0 = std::clamp(b.y0 - static_cast<double>(crop_y), 0.0, hd);
      b.y1 = std::clamp(b.y1 - static_cast<double>(crop_y), 0.0, hd);
      if (b.w() < 2.0 || b.h() < 2.0) continue;
      g.box = b;
      mapped.push_back(g);
    }
    out.boxes.push_back(std::move(mapped));
  }
  return out;
}

LetterboxTransform letterbox_plan(size_t h, size_t w, size_t target_short, size_t pad_multiple) {
  check(h > 0 && w > 0, "letterbox: empty image");
  check(target_short > 0 && pad_multiple > 0, "letterbox: bad target/padding");
  LetterboxTransform t;
  const size_t short_side = std::min(h, w);
  t.scale = static_cast<double>(target_short) / static_cast<double>(short_side);
  if (h <= w) {
    t.content_h = target_short;
    t.content_w = static_cast<size_t>(std::llround(static_cast<double>(w) * t.scale));
  } else {
    t.content_w = target_short;
    t.content_h = static_cast<size_t>(std::llround(static_cast<double>(h) * t.scale));
  }
  auto round_up = [&](size_t v) { return ((v + pad_multiple - 1) / pad_multiple) * pad_multiple; };
  t.out_w = round_up(t.content_w);
  t.out_h = round_up(t.content_h);
  return t;
}

std::vector<double> letterbox_frame(const std::vector<double>& img, size_t c, size_t h, size_t w,
                                    const LetterboxTransform& t) {
  check(img.size() == c * h * w, "letterbox_frame: image size mismatch");
  std::vector<double> out(c * t.out_h * t.out_w, 0.0);
  if (t.content_h == h && t.content_w == w) {  // identity resize, copy into the padded canvas
    for (size_t ch = 0; ch < c; ++ch)
      for (size_t y = 0; y < h; ++y)
        std::copy(img.begin() + (ch * h + y) * w, img.begin() + (ch * h + y) * w + w,
                  out.begin() + (ch * t.out_h + y) * t.out_w);
    return out;
  }
  const double inv = 1.0 / t.scale;
  for (size_t ch = 0; ch < c; ++ch) {
    const double* plane = img.data() + ch * h * w;
    for (size_t y = 0; y < t.content_h; ++y) {
      const double sy = (static_cast<double>(y) + 0.5) * inv - 0.5;
      const double syc = std::clamp(sy, 0.0, static_cast<double>(h - 1));
      const size_t y0 = static_cast<size_t>(syc);
      const size_t y1 = std::min(y0 + 1, h - 1);
      const double fy = syc - static_cast<double>(y0);
      for (size_t x = 0; x < t.content_w; ++x) {
        const double sx = (static_cast<double>(x) + 0.5) * inv - 0.5;
        const double sxc = std::clamp(sx, 0.0, static_cast<double>(w - 1));
        const size_t x0 = static_cast<size_t>(sxc);
        const size_t x1 = std::min(x0 + 1, w - 1);
        const double fx = sxc - static_cast<double>(x0);
        const double top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
        const double bot = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
        out[(ch * t.out_h + y) * t.out_w + x] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

BBox letterbox_box(const BBox& b, const LetterboxTransform& t) {
  return {b.x0 * t.scale, b.y0 * t.scale, b.x1 * t.scale, b.y1 * t.scale};
}

BBox letterbox_invert(const BBox& b, const LetterboxTransform& t) {
  return {b.x0 / t.scale, b.y0 / t.scale, b.x1 / t.scale, b.y1 / t.scale};
}

ModelInput prepare_input(const SnippetBatch& snippet, size_t target_short, size_t pad_multiple) {
  ModelInput mi;
  mi.transform = letterbox_plan(snippet.height, snippet.width, target_short, pad_multiple);
  for (const auto& img : snippet.frames) {
    std::vector<double> f =
        letterbox_frame(img, snippet.channels, snippet.height, snippet.width, mi.transform);
    mi.frames.push_back(Tensor::from_data({snippet.channels, mi.transform.out_h, mi.transform.out_w},
                                          std::move(f)));
  }
  for (const GtBox& g : snippet.boxes[snippet.main_index()]) {
    GtBox m = g;
    m.box = letterbox_box(g.box, mi.transform);
    mi.main_gt.push_back(m);
  }
  return mi;
}

}  // namespace blendnet
