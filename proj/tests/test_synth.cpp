#include <cmath>
#include <cstring>
#include <vector>

#include <doctest.h>

#include "blendnet/common.hpp"
#include "blendnet/synth.hpp"

using namespace blendnet;

TEST_CASE("same config generates byte-identical clips") {
  SynthConfig cfg;
  cfg.num_clips = 2;
  cfg.frames_per_clip = 6;
  cfg.image_size = 48;
  cfg.seed = 99;
  auto a = generate_synthetic(cfg);
  auto b = generate_synthetic(cfg);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].frames.size() == b[i].frames.size());
    for (size_t f = 0; f < a[i].frames.size(); ++f)
      CHECK(std::memcmp(a[i].frames[f].data(), b[i].frames[f].data(),
                        a[i].frames[f].size() * sizeof(double)) == 0);
    REQUIRE(a[i].boxes.size() == b[i].boxes.size());
    for (size_t f = 0; f < a[i].boxes.size(); ++f) {
      REQUIRE(a[i].boxes[f].size() == b[i].boxes[f].size());
      for (size_t g = 0; g < a[i].boxes[f].size(); ++g) {
        CHECK(a[i].boxes[f][g].box.x0 == b[i].boxes[f][g].box.x0);
        CHECK(a[i].boxes[f][g].visibility == b[i].boxes[f][g].visibility);
      }
    }
  }
  CHECK(dataset_digest(a) == dataset_digest(b));
}

TEST_CASE("clips are independent of how many siblings are generated") {
  SynthConfig cfg;
  cfg.num_clips = 3;
  cfg.frames_per_clip = 4;
  cfg.image_size = 48;
  cfg.seed = 5;
  auto all = generate_synthetic(cfg);
  VideoClip third = generate_clip(cfg, 2);
  REQUIRE(all[2].frames.size() == third.frames.size());
  for (size_t f = 0; f < third.frames.size(); ++f)
    CHECK(std::memcmp(all[2].frames[f].data(), third.frames[f].data(),
                      third.frames[f].size() * sizeof(double)) == 0);
}

TEST_CASE("different seeds give different pixels") {
  SynthConfig a, b;
  a.num_clips = b.num_clips = 1;
  a.frames_per_clip = b.frames_per_clip = 3;
  a.image_size = b.image_size = 48;
  a.seed = 1;
  b.seed = 2;
  CHECK(dataset_digest(generate_synthetic(a)) != dataset_digest(generate_synthetic(b)));
}

TEST_CASE("zero occluders and zero jitter leave every object fully visible") {
  SynthConfig cfg;
  cfg.num_clips = 2;
  cfg.frames_per_clip = 8;
  cfg.image_size = 64;
  cfg.occluder_density = 0.0;
  cfg.lighting_jitter = 0.0;
  cfg.seed = 17;
  for (const auto& clip : generate_synthetic(cfg))
    for (const auto& frame_boxes : clip.boxes)
      for (const auto& g : frame_boxes) CHECK(g.visibility == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("visibility reflects occlusion and reaches exactly zero under a full cover") {
  SynthConfig cfg;
  cfg.num_clips = 2;
  cfg.frames_per_clip = 12;
  cfg.image_size = 64;
  cfg.occluder_density = 0.85;
  bool saw_zero = false, saw_partial = false;
  for (uint64_t seed = 1; seed <= 40 && !(saw_zero && saw_partial); ++seed) {
    cfg.seed = seed;
    for (const auto& clip : generate_synthetic(cfg))
      for (const auto& frame_boxes : clip.boxes)
        for (const auto& g : frame_boxes) {
          CHECK(g.visibility >= 0.0);
          CHECK(g.visibility <= 1.0);
          // Visibility is quantized to two decimals.
          CHECK(g.visibility == doctest::Approx(std::round(g.visibility * 100) / 100).epsilon(1e-12));
          if (g.visibility == 0.0) saw_zero = true;
          if (g.visibility > 0.0 && g.visibility < 1.0) saw_partial = true;
        }
  }
  CHECK(saw_zero);     // an object fully behind a strip reports 0.0
  CHECK(saw_partial);  // grazing a strip reports a proper fraction
}

TEST_CASE("ground truth stays within the frame and keeps full extent") {
  SynthConfig cfg;
  cfg.num_clips = 3;
  cfg.frames_per_clip = 12;
  cfg.seed = 31;
  for (const auto& clip : generate_synthetic(cfg))
    for (const auto& frame_boxes : clip.boxes)
      for (const auto& g : frame_boxes) {
        CHECK(g.box.valid());
        CHECK(g.box.x0 >= 0.0);
        CHECK(g.box.y0 >= 0.0);
        CHECK(g.box.x1 <= static_cast<double>(cfg.image_size));
        CHECK(g.box.y1 <= static_cast<double>(cfg.image_size));
        CHECK(g.cls == 0);
      }
}

TEST_CASE("object count respects the configured range") {
  SynthConfig cfg;
  cfg.num_clips = 6;
  cfg.frames_per_clip = 4;
  cfg.min_objects = 2;
  cfg.max_objects = 3;
  cfg.seed = 41;
  for (const auto& clip : generate_synthetic(cfg))
    for (const auto& frame_boxes : clip.boxes) {
      CHECK(frame_boxes.size() >= 2);
      CHECK(frame_boxes.size() <= 3);
    }
}

TEST_CASE("pixels stay in the unit interval") {
  SynthConfig cfg;
  cfg.num_clips = 2;
  cfg.frames_per_clip = 6;
  cfg.seed = 47;
  for (const auto& clip : generate_synthetic(cfg))
    for (const auto& f : clip.frames)
      for (double v : f) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
}

TEST_CASE("config validation rejects nonsense") {
  SynthConfig cfg;
  cfg.num_clips = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SynthConfig{};
  cfg.occluder_density = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SynthConfig{};
  cfg.min_objects = 5;
  cfg.max_objects = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SynthConfig{};
  cfg.image_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("objects move between frames") {
  SynthConfig cfg;
  cfg.num_clips = 1;
  cfg.frames_per_clip = 10;
  cfg.walk_speed = 2.0;
  cfg.occluder_density = 0.0;
  cfg.seed = 53;
  VideoClip clip = generate_clip(cfg, 0);
  double moved = 0.0;
  for (size_t f = 1; f < clip.boxes.size(); ++f)
    if (!clip.boxes[f].empty() && !clip.boxes[f - 1].empty())
      moved += std::fabs(clip.boxes[f][0].box.cx() - clip.boxes[f - 1][0].box.cx()) +
               std::fabs(clip.boxes[f][0].box.cy() - clip.boxes[f - 1][0].box.cy());
  CHECK(moved > 0.0);
}
