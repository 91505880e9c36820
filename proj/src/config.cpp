#include "blendnet/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "blendnet/common.hpp"
#include "blendnet/rng.hpp"

namespace blendnet {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Shortest decimal form that parses back to the identical double, so the
// config echo is both readable and exact.
std::string fmt_double(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string fmt_size_list(const std::vector<size_t>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  check(!v.empty(), "config: empty value for `" + key + "`");
  char* end = nullptr;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  check(end && *end == '\0' && v[0] != '-', "config: `" + key + "` expects a non-negative integer, got `" + v + "`");
  return static_cast<uint64_t>(x);
}

int64_t parse_i64(const std::string& key, const std::string& v) {
  check(!v.empty(), "config: empty value for `" + key + "`");
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  check(end && *end == '\0', "config: `" + key + "` expects an integer, got `" + v + "`");
  return static_cast<int64_t>(x);
}

double parse_f64(const std::string& key, const std::string& v) {
  check(!v.empty(), "config: empty value for `" + key + "`");
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  check(end && *end == '\0', "config: `" + key + "` expects a number, got `" + v + "`");
  check(std::isfinite(x), "config: `" + key + "` must be finite");
  return x;
}

std::vector<size_t> parse_size_list(const std::string& key, const std::string& v) {
  std::vector<size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<size_t>(parse_u64(key, item)));
  }
  return out;
}

}  // namespace

BlendOrder parse_order(const std::string& s) {
  if (s == "none") return BlendOrder::None;
  if (s == "scm_only") return BlendOrder::ScmOnly;
  if (s == "tcm_only") return BlendOrder::TcmOnly;
  if (s == "tcm_scm") return BlendOrder::TcmThenScm;
  if (s == "scm_tcm") return BlendOrder::ScmThenTcm;
  fail("config: unknown blend order `" + s +
       "` (expected none, scm_only, tcm_only, tcm_scm, or scm_tcm)");
}

InsertionPoint parse_insertion(const std::string& s) {
  if (s == "after_add") return InsertionPoint::AfterAdd;
  if (s == "after_1x1") return InsertionPoint::After1x1;
  if (s == "after_3x3") return InsertionPoint::After3x3;
  fail("config: unknown insertion point `" + s +
       "` (expected after_add, after_1x1, or after_3x3)");
}

EmbeddingStrategy parse_embedding(const std::string& s) {
  if (s == "positional") return EmbeddingStrategy::Positional;
  if (s == "main_refs") return EmbeddingStrategy::MainAndRefs;
  fail("config: unknown embedding strategy `" + s + "` (expected positional or main_refs)");
}

void RunConfig::validate() const {
  check(t_train % 2 == 1, "config: t_train must be odd, got " + std::to_string(t_train));
  check(t_test % 2 == 1, "config: t_test must be odd, got " + std::to_string(t_test));
  check(t_train >= 1 && t_test >= 1, "config: snippet lengths must be at least 1");
  check(reduction >= 1, "config: reduction must be at least 1");
  check(stage_widths.size() == 5, "config: stage_widths needs exactly 5 entries");
  for (size_t w : stage_widths) check(w >= 1, "config: stage widths must be positive");
  check(stage_widths[4] % reduction == 0, "config: stage_widths[4] must be divisible by reduction");
  check((stage_widths[4] / 2) % reduction == 0,
        "config: the residual mid width (stage_widths[4]/2) must be divisible by reduction");
  check(num_classes >= 1, "config: num_classes must be at least 1");
  check(image_size >= 64, "config: image_size must be at least 64");
  check(target_short >= 64, "config: target_short must be at least 64");
  check(min_objects >= 1 && max_objects >= min_objects, "config: bad object count range");
  check(occluder_density >= 0.0 && occluder_density < 0.9, "config: occluder_density out of range");
  check(epochs >= 1, "config: epochs must be at least 1");
  check(grad_accum >= 1, "config: grad_accum must be at least 1");
  check(sample_stride >= 1, "config: sample_stride must be at least 1");
  check(lr_start > 0.0 && lr_peak > 0.0, "config: learning rates must be positive");
  check(decay_factor > 0.0 && decay_factor <= 1.0, "config: decay_factor must be in (0, 1]");
  check(momentum >= 0.0 && momentum < 1.0, "config: momentum must be in [0, 1)");
  check(score_floor >= 0.0 && score_floor < 1.0, "config: score_floor must be in [0, 1)");
  check(nms_iou > 0.0 && nms_iou < 1.0, "config: nms_iou must be in (0, 1)");
  check(map_iou > 0.0 && map_iou < 1.0, "config: map_iou must be in (0, 1)");
  check(max_dets >= 1, "config: max_dets must be at least 1");
  check(frames_per_clip >= t_train && frames_per_clip >= t_test,
        "config: frames_per_clip shorter than the snippet length");
}

SynthConfig RunConfig::synth_split(const std::string& split) const {
  check(split == "train" || split == "test", "unknown split `" + split + "`");
  SynthConfig s;
  s.num_clips = split == "train" ? train_clips : test_clips;
  s.frames_per_clip = frames_per_clip;
  s.image_size = image_size;
  s.min_objects = min_objects;
  s.max_objects = max_objects;
  s.occluder_density = occluder_density;
  s.lighting_jitter = lighting_jitter;
  s.contrast = contrast;
  s.walk_speed = walk_speed;
  s.noise = noise;
  s.seed = derive_seed(seed, split == "train" ? "train-data" : "test-data");
  s.clip_prefix = split;
  return s;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.in_channels = 1;
  m.num_classes = num_classes;
  m.stage_widths = stage_widths;
  m.pyramid_width = pyramid_width;
  m.head_width = head_width;
  m.blend.order = order;
  m.blend.insertion = insertion;
  m.blend.embedding = embedding;
  m.blend.t_train = t_train;
  m.blend.reduction = reduction;
  m.anchor_spec = AnchorSpec{}.scaled_to(static_cast<double>(target_short));
  m.score_floor = score_floor;
  m.nms_iou = nms_iou;
  m.max_dets_per_frame = max_dets;
  return m;
}

LrSchedule RunConfig::lr_schedule() const {
  LrSchedule s;
  s.lr_start = lr_start;
  s.lr_peak = lr_peak;
  s.warmup_iters = warmup_iters;
  s.decay_epochs = decay_epochs;
  s.decay_factor = decay_factor;
  return s;
}

size_t RunConfig::pad_multiple() const {
  auto m = static_cast<long long>(std::llround(128.0 * static_cast<double>(target_short) / 512.0));
  return static_cast<size_t>(m < 1 ? 1 : m);
}

std::string RunConfig::train_dir() const { return dataset_dir + "/train"; }
std::string RunConfig::test_dir() const { return dataset_dir + "/test"; }

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::stringstream ss(text);
  std::string line, section;
  size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::string where = " (line " + std::to_string(line_no) + ")";
    if (line.front() == '[') {
      check(line.back() == ']', "config: malformed section header" + where);
      section = trim(line.substr(1, line.size() - 2));
      check(section == "run" || section == "synth" || section == "data" || section == "model" ||
                section == "blend" || section == "train" || section == "eval",
            "config: unknown section [" + section + "]" + where);
      continue;
    }
    size_t eq = line.find('=');
    check(eq != std::string::npos, "config: expected `key = value`" + where);
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    check(!key.empty(), "config: empty key" + where);
    check(!section.empty(), "config: `" + key + "` appears before any [section]" + where);
    std::string qual = section + "." + key;

    if (qual == "run.seed") c.seed = parse_u64(qual, val);
    else if (qual == "run.out_dir") c.out_dir = val;
    else if (qual == "synth.train_clips") c.train_clips = parse_u64(qual, val);
    else if (qual == "synth.test_clips") c.test_clips = parse_u64(qual, val);
    else if (qual == "synth.frames_per_clip") c.frames_per_clip = parse_u64(qual, val);
    else if (qual == "synth.image_size") c.image_size = parse_u64(qual, val);
    else if (qual == "synth.min_objects") c.min_objects = parse_u64(qual, val);
    else if (qual == "synth.max_objects") c.max_objects = parse_u64(qual, val);
    else if (qual == "synth.occluder_density") c.occluder_density = parse_f64(qual, val);
    else if (qual == "synth.lighting_jitter") c.lighting_jitter = parse_f64(qual, val);
    else if (qual == "synth.contrast") c.contrast = parse_f64(qual, val);
    else if (qual == "synth.walk_speed") c.walk_speed = parse_f64(qual, val);
    else if (qual == "synth.noise") c.noise = parse_f64(qual, val);
    else if (qual == "data.dataset_dir") c.dataset_dir = val;
    else if (qual == "data.target_short") c.target_short = parse_u64(qual, val);
    else if (qual == "data.sample_stride") c.sample_stride = static_cast<int>(parse_i64(qual, val));
    else if (qual == "model.num_classes") c.num_classes = parse_u64(qual, val);
    else if (qual == "model.stage_widths") c.stage_widths = parse_size_list(qual, val);
    else if (qual == "model.pyramid_width") c.pyramid_width = parse_u64(qual, val);
    else if (qual == "model.head_width") c.head_width = parse_u64(qual, val);
    else if (qual == "blend.order") c.order = parse_order(val);
    else if (qual == "blend.insertion") c.insertion = parse_insertion(val);
    else if (qual == "blend.embedding") c.embedding = parse_embedding(val);
    else if (qual == "blend.t_train") c.t_train = parse_u64(qual, val);
    else if (qual == "blend.t_test") c.t_test = parse_u64(qual, val);
    else if (qual == "blend.reduction") c.reduction = parse_u64(qual, val);
    else if (qual == "train.epochs") c.epochs = parse_u64(qual, val);
    else if (qual == "train.warmup_iters") c.warmup_iters = parse_u64(qual, val);
    else if (qual == "train.lr_start") c.lr_start = parse_f64(qual, val);
    else if (qual == "train.lr_peak") c.lr_peak = parse_f64(qual, val);
    else if (qual == "train.decay_epochs") c.decay_epochs = parse_size_list(qual, val);
    else if (qual == "train.decay_factor") c.decay_factor = parse_f64(qual, val);
    else if (qual == "train.momentum") c.momentum = parse_f64(qual, val);
    else if (qual == "train.grad_accum") c.grad_accum = parse_u64(qual, val);
    else if (qual == "train.warm_start") c.warm_start = val;
    else if (qual == "eval.score_floor") c.score_floor = parse_f64(qual, val);
    else if (qual == "eval.nms_iou") c.nms_iou = parse_f64(qual, val);
    else if (qual == "eval.map_iou") c.map_iou = parse_f64(qual, val);
    else if (qual == "eval.max_dets") c.max_dets = parse_u64(qual, val);
    else fail("config: unknown key `" + key + "` in [" + section + "]" + where);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& c) {
  std::stringstream out;
  out << "[run]\n";
  out << "seed = " << c.seed << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  out << "\n[synth]\n";
  out << "train_clips = " << c.train_clips << "\n";
  out << "test_clips = " << c.test_clips << "\n";
  out << "frames_per_clip = " << c.frames_per_clip << "\n";
  out << "image_size = " << c.image_size << "\n";
  out << "min_objects = " << c.min_objects << "\n";
  out << "max_objects = " << c.max_objects << "\n";
  out << "occluder_density = " << fmt_double(c.occluder_density) << "\n";
  out << "lighting_jitter = " << fmt_double(c.lighting_jitter) << "\n";
  out << "contrast = " << fmt_double(c.contrast) << "\n";
  out << "walk_speed = " << fmt_double(c.walk_speed) << "\n";
  out << "noise = " << fmt_double(c.noise) << "\n";
  out << "\n[data]\n";
  out << "dataset_dir = " << c.dataset_dir << "\n";
  out << "target_short = " << c.target_short << "\n";
  out << "sample_stride = " << c.sample_stride << "\n";
  out << "\n[model]\n";
  out << "num_classes = " << c.num_classes << "\n";
  out << "stage_widths = " << fmt_size_list(c.stage_widths) << "\n";
  out << "pyramid_width = " << c.pyramid_width << "\n";
  out << "head_width = " << c.head_width << "\n";
  out << "\n[blend]\n";
  out << "order = " << to_string(c.order) << "\n";
  out << "insertion = " << to_string(c.insertion) << "\n";
  out << "embedding = " << to_string(c.embedding) << "\n";
  out << "t_train = " << c.t_train << "\n";
  out << "t_test = " << c.t_test << "\n";
  out << "reduction = " << c.reduction << "\n";
  out << "\n[train]\n";
  out << "epochs = " << c.epochs << "\n";
  out << "warmup_iters = " << c.warmup_iters << "\n";
  out << "lr_start = " << fmt_double(c.lr_start) << "\n";
  out << "lr_peak = " << fmt_double(c.lr_peak) << "\n";
  out << "decay_epochs = " << fmt_size_list(c.decay_epochs) << "\n";
  out << "decay_factor = " << fmt_double(c.decay_factor) << "\n";
  out << "momentum = " << fmt_double(c.momentum) << "\n";
  out << "grad_accum = " << c.grad_accum << "\n";
  out << "warm_start = " << c.warm_start << "\n";
  out << "\n[eval]\n";
  out << "score_floor = " << fmt_double(c.score_floor) << "\n";
  out << "nms_iou = " << fmt_double(c.nms_iou) << "\n";
  out << "map_iou = " << fmt_double(c.map_iou) << "\n";
  out << "max_dets = " << c.max_dets << "\n";
  return out.str();
}

uint64_t config_hash(const RunConfig& c) {
  std::string s = serialize_config(c);
  return fnv1a64(s.data(), s.size());
}

}  // namespace blendnet
