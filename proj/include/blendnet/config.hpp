#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blendnet/model.hpp"
#include "blendnet/optim.hpp"
#include "blendnet/synth.hpp"

namespace blendnet {

// Every experiment knob, grouped the way the config file sections are. The
// file format is flat `key = value` lines under [section] headers; parsing
// rejects unknown sections and keys, serialization writes every field, and
// parse(serialize(c)) == c is a tested invariant.
struct RunConfig {
  // [run]
  uint64_t seed = 1;
  std::string out_dir = "runs/out";

  // [synth]
  size_t train_clips = 40;
  size_t test_clips = 10;
  size_t frames_per_clip = 40;
  size_t image_size = 64;
  size_t min_objects = 1;
  size_t max_objects = 3;
  double occluder_density = 0.35;
  double lighting_jitter = 0.05;
  double contrast = 0.35;
  double walk_speed = 1.0;
  double noise = 0.03;

  // [data]
  std::string dataset_dir = "data/synth";
  size_t target_short = 64;
  int sample_stride = 1;

  // [model]
  size_t num_classes = 1;
  std::vector<size_t> stage_widths{16, 32, 64, 128, 128};
  size_t pyramid_width = 64;
  size_t head_width = 64;

  // [blend]
  BlendOrder order = BlendOrder::TcmThenScm;
  InsertionPoint insertion = InsertionPoint::AfterAdd;
  EmbeddingStrategy embedding = EmbeddingStrategy::Positional;
  size_t t_train = 5;
  size_t t_test = 5;
  size_t reduction = 4;

  // [train]
  size_t epochs = 14;
  size_t warmup_iters = 500;
  double lr_start = 0.002;
  double lr_peak = 0.01;
  std::vector<size_t> decay_epochs{6, 11};
  double decay_factor = 0.1;
  double momentum = 0.9;
  size_t grad_accum = 1;
  std::string warm_start;  // optional checkpoint path

  // [eval]
  double score_floor = 0.05;
  double nms_iou = 0.5;
  double map_iou = 0.5;
  size_t max_dets = 100;

  void validate() const;

  SynthConfig synth_split(const std::string& split) const;  // "train" or "test"
  ModelConfig model_config() const;
  LrSchedule lr_schedule() const;
  size_t pad_multiple() const;
  std::string train_dir() const;
  std::string test_dir() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);
uint64_t config_hash(const RunConfig& cfg);

BlendOrder parse_order(const std::string& s);
InsertionPoint parse_insertion(const std::string& s);
EmbeddingStrategy parse_embedding(const std::string& s);

}  // namespace blendnet
