#include "blendnet/synth.hpp"

#include <algorithm>
#include <cmath>

#include "blendnet/common.hpp"

namespace blendnet {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double quantize2(double v) { return std::round(v * 100.0) / 100.0; }

// Stateless per-pixel noise in [-1,1); depends only on (key, frame, y, x),
// never on evaluation order.
double speckle(uint64_t key, uint64_t frame, uint64_t y, uint64_t x) {
  uint64_t h = derive_seed(key, "px", (frame << 32) | y, x);
  return 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
}

struct Strip {
  size_t x0, x1;  // [x0, x1)
  double shade;
  double wobble_freq, wobble_phase;
};

struct Ellipse {
  double cx, cy;     // current center
  double vx, vy;     // velocity, px/frame
  double rx, ry;     // semi-axes
  double shade;      // base intensity
  double tex_ux, tex_uy, tex_freq, tex_phase;
};

bool inside(const Ellipse& e, double x, double y) {
  const double dx = (x - e.cx) / e.rx;
  const double dy = (y - e.cy) / e.ry;
  return dx * dx + dy * dy <= 1.0;
}

}  // namespace

void SynthConfig::validate() const {
  check(num_clips > 0, "synth: zero clips requested");
  check(frames_per_clip > 0, "synth: zero frames per clip");
  check(image_size >= 32, "synth: image size ", image_size, " too small");
  check(min_objects >= 1 && min_objects <= max_objects, "synth: bad object count range [",
        min_objects, ",", max_objects, "]");
  check(occluder_density >= 0.0 && occluder_density < 0.9, "synth: occluder density ",
        occluder_density, " outside [0, 0.9)");
  check(lighting_jitter >= 0.0 && contrast >= 0.0 && walk_speed >= 0.0 && noise >= 0.0,
        "synth: negative knob");
}

VideoClip generate_clip(const SynthConfig& cfg, size_t index) {
  cfg.validate();
  const size_t S = cfg.image_size;
  Rng rng(derive_seed(cfg.seed, "clip", index));
  const uint64_t speckle_key = derive_seed(cfg.seed, "speckle", index);

  VideoClip clip;
  clip.id = cfg.clip_prefix + std::to_string(index);
  clip.channels = 1;
  clip.height = S;
  clip.width = S;

  // Static background: base level plus two low-frequency waves.
  const double bg_base = rng.uniform(0.58, 0.72);
  double wf[2], wpx[2], wpy[2], wa[2];
  for (int k = 0; k < 2; ++k) {
    wf[k] = rng.uniform(0.05, 0.20);
    wpx[k] = rng.uniform(0.0, kTwoPi);
    wpy[k] = rng.uniform(0.0, kTwoPi);
    wa[k] = rng.uniform(0.02, 0.05);
  }
  auto background = [&](double x, double y) {
    double v = bg_base;
    for (int k = 0; k < 2; ++k)
      v += wa[k] * std::sin(wf[k] * x + wpx[k]) * std::sin(wf[k] * y + wpy[k]);
    return v;
  };

  // Static vertical occluder strips covering about occluder_density of the
  // width, placed without overlap so gaps survive between them.
  std::vector<Strip> strips;
  {
    const double target = cfg.occluder_density * static_cast<double>(S);
    double covered = 0.0;
    for (int attempt = 0; attempt < 64 && covered < target; ++attempt) {
      const size_t w = static_cast<size_t>(rng.uniform_int(5, 14));
      if (w >= S) continue;
      const size_t x0 = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(S - w)));
      bool clash = false;
      for (const Strip& s : strips)
        if (x0 < s.x1 + 2 && s.x0 < x0 + w + 2) clash = true;
      if (clash) continue;
      Strip s;
      s.x0 = x0;
      s.x1 = x0 + w;
      s.shade = rng.uniform(0.30, 0.45);
      s.wobble_freq = rng.uniform(0.2, 0.6);
      s.wobble_phase = rng.uniform(0.0, kTwoPi);
      strips.push_back(s);
      covered += static_cast<double>(w);
    }
  }
  auto occluded = [&](double x) {
    for (const Strip& s : strips)
      if (x >= static_cast<double>(s.x0) && x < static_cast<double>(s.x1)) return true;
    return false;
  };

  // Objects: dark textured ellipses on smooth bouncing walks.
  const size_t n_obj =
      static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(cfg.min_objects),
                                          static_cast<int64_t>(cfg.max_objects)));
  std::vector<Ellipse> objs;
  for (size_t i = 0; i < n_obj; ++i) {
    Ellipse e;
    e.rx = rng.uniform(5.0, 8.0);
    e.ry = rng.uniform(5.0, 8.0);
    const double margin_x = e.rx + 1.0, margin_y = e.ry + 1.0;
    e.cx = rng.uniform(margin_x, static_cast<double>(S) - margin_x);
    e.cy = rng.uniform(margin_y, static_cast<double>(S) - margin_y);
    const double heading = rng.uniform(0.0, kTwoPi);
    const double speed = rng.uniform(0.4, 1.0) * cfg.walk_speed;
    e.vx = speed * std::cos(heading);
    e.vy = speed * std::sin(heading);
    e.shade = bg_base - cfg.contrast * rng.uniform(0.8, 1.2);
    const double tex_dir = rng.uniform(0.0, kTwoPi);
    e.tex_ux = std::cos(tex_dir);
    e.tex_uy = std::sin(tex_dir);
    e.tex_freq = rng.uniform(0.8, 1.6);
    e.tex_phase = rng.uniform(0.0, kTwoPi);
    objs.push_back(e);
  }

  double brightness = 1.0;
  for (size_t t = 0; t < cfg.frames_per_clip; ++t) {
    // Draw in a fixed order per frame: brightness step, then per-object
    // acceleration, so the stream stays aligned regardless of content.
    if (t > 0) {
      brightness = std::clamp(brightness + rng.normal(0.0, cfg.lighting_jitter), 0.75, 1.25);
      for (Ellipse& e : objs) {
        e.vx += rng.normal(0.0, 0.12 * cfg.walk_speed);
        e.vy += rng.normal(0.0, 0.12 * cfg.walk_speed);
        const double vmax = std::max(1e-9, 1.5 * cfg.walk_speed);
        e.vx = std::clamp(e.vx, -vmax, vmax);
        e.vy = std::clamp(e.vy, -vmax, vmax);
        e.cx += e.vx;
        e.cy += e.vy;
        const double mx = e.rx + 1.0, my = e.ry + 1.0;
        if (e.cx < mx) { e.cx = 2.0 * mx - e.cx; e.vx = -e.vx; }
        if (e.cx > S - mx) { e.cx = 2.0 * (S - mx) - e.cx; e.vx = -e.vx; }
        if (e.cy < my) { e.cy = 2.0 * my - e.cy; e.vy = -e.vy; }
        if (e.cy > S - my) { e.cy = 2.0 * (S - my) - e.cy; e.vy = -e.vy; }
      }
    }

    std::vector<double> img(S * S);
    for (size_t y = 0; y < S; ++y)
      for (size_t x = 0; x < S; ++x) {
        const double xd = static_cast<double>(x), yd = static_cast<double>(y);
        double v = background(xd, yd);
        for (const Ellipse& e : objs)
          if (inside(e, xd, yd))
            v = e.shade +
                0.05 * std::sin(e.tex_freq * (xd * e.tex_ux + yd * e.tex_uy) + e.tex_phase);
        for (const Strip& s : strips)
          if (x >= s.x0 && x < s.x1)
            v = s.shade + 0.04 * std::sin(s.wobble_freq * yd + s.wobble_phase);
        v = brightness * v + cfg.noise * speckle(speckle_key, t, y, x);
        img[y * S + x] = std::clamp(v, 0.0, 1.0);
      }
    clip.frames.push_back(std::move(img));

    std::vector<GtBox> frame_boxes;
    for (const Ellipse& e : objs) {
      GtBox g;
      g.cls = 0;
      g.box.x0 = quantize2(std::max(0.0, e.cx - e.rx));
      g.box.y0 = quantize2(std::max(0.0, e.cy - e.ry));
      g.box.x1 = quantize2(std::min(static_cast<double>(S), e.cx + e.rx));
      g.box.y1 = quantize2(std::min(static_cast<double>(S), e.cy + e.ry));
      // Pixel-center count of the unoccluded ellipse fraction.
      size_t total = 0, visible = 0;
      const long px0 = static_cast<long>(std::floor(e.cx - e.rx));
      const long px1 = static_cast<long>(std::ceil(e.cx + e.rx));
      const long py0 = static_cast<long>(std::floor(e.cy - e.ry));
      const long py1 = static_cast<long>(std::ceil(e.cy + e.ry));
      for (long py = py0; py <= py1; ++py)
        for (long px = px0; px <= px1; ++px) {
          const double cxp = static_cast<double>(px) + 0.5;
          const double cyp = static_cast<double>(py) + 0.5;
          if (!inside(e, cxp, cyp)) continue;
          ++total;
          if (!occluded(cxp)) ++visible;
        }
      g.visibility = total == 0
                         ? 0.0
                         : std::round(100.0 * static_cast<double>(visible) /
                                      static_cast<double>(total)) /
                               100.0;
      frame_boxes.push_back(g);
    }
    clip.boxes.push_back(std::move(frame_boxes));
  }
  return clip;
}

std::vector<VideoClip> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<VideoClip> clips;
  clips.reserve(cfg.num_clips);
  for (size_t i = 0; i < cfg.num_clips; ++i) clips.push_back(generate_clip(cfg, i));
  return clips;
}

uint64_t dataset_digest(const std::vector<VideoClip>& clips) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const VideoClip& c : clips) {
    mix(c.id.data(), c.id.size());
    for (const auto& f : c.frames) mix(f.data(), f.size() * sizeof(double));
    for (const auto& frame_boxes : c.boxes)
      for (const GtBox& g : frame_boxes) {
        const double vals[6] = {g.box.x0, g.box.y0, g.box.x1, g.box.y1,
                                static_cast<double>(g.cls), g.visibility};
        mix(vals, sizeof vals);
      }
  }
  return h;
}

}  // namespace blendnet
