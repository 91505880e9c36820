#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blendnet/annotations.hpp"
#include "blendnet/checkpoint.hpp"
#include "blendnet/common.hpp"
#include "blendnet/config.hpp"
#include "blendnet/evaluator.hpp"
#include "blendnet/model.hpp"
#include "blendnet/selftest.hpp"
#include "blendnet/synth.hpp"
#include "blendnet/trainer.hpp"
#include "blendnet/visualize.hpp"

namespace fs = std::filesystem;
using namespace blendnet;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string checkpoint;
  uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_checkpoint) {
  cmd->add_option("--config", f.config_path, "run config file (defaults apply if omitted)");
  cmd->add_option("--out", f.out_dir, "output directory override");
  auto* seed = cmd->add_option("--seed", f.seed, "seed override");
  seed->each([&f](const std::string&) { f.seed_set = true; });
  cmd->add_flag("--force", f.force, "allow writing into a non-empty output directory");
  if (with_checkpoint) cmd->add_option("--checkpoint", f.checkpoint, "checkpoint file");
}

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg = f.config_path.empty() ? RunConfig{} : load_config(f.config_path);
  if (f.seed_set) cfg.seed = f.seed;
  cfg.validate();
  return cfg;
}

void prepare_out_dir(const std::string& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    check(force, "output directory " + dir + " is not empty (use --force to proceed)");
  }
  fs::create_directories(dir);
}

void echo_config(const RunConfig& cfg, const std::string& dir) {
  std::ofstream out(dir + "/config.txt", std::ios::binary);
  check(out.good(), "cannot write config echo in " + dir);
  out << serialize_config(cfg);
  check(out.good(), "failed writing config echo in " + dir);
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int cmd_gen(const CommonFlags& flags) {
  RunConfig cfg = resolve_config(flags);
  if (!flags.out_dir.empty()) cfg.dataset_dir = flags.out_dir;
  check(cfg.train_clips > 0 && cfg.test_clips > 0, "zero clips requested");

  prepare_out_dir(cfg.dataset_dir, flags.force);
  std::vector<VideoClip> train = generate_synthetic(cfg.synth_split("train"));
  std::vector<VideoClip> test = generate_synthetic(cfg.synth_split("test"));
  save_dataset(train, cfg.train_dir());
  save_dataset(test, cfg.test_dir());

  std::ofstream manifest(cfg.dataset_dir + "/dataset_manifest.txt", std::ios::binary);
  check(manifest.good(), "cannot write dataset manifest");
  manifest << "blendnet-dataset v1\n";
  manifest << "seed = " << cfg.seed << "\n";
  manifest << "train_clips = " << train.size() << "\n";
  manifest << "test_clips = " << test.size() << "\n";
  manifest << "frames_per_clip = " << cfg.frames_per_clip << "\n";
  manifest << "train_digest = " << hex64(dataset_digest(train)) << "\n";
  manifest << "test_digest = " << hex64(dataset_digest(test)) << "\n";
  check(manifest.good(), "failed writing dataset manifest");
  echo_config(cfg, cfg.dataset_dir);

  std::printf("wrote %zu train + %zu test clips to %s\n", train.size(), test.size(),
              cfg.dataset_dir.c_str());
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  RunConfig cfg = resolve_config(flags);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (!flags.checkpoint.empty()) cfg.warm_start = flags.checkpoint;

  prepare_out_dir(cfg.out_dir, flags.force);
  echo_config(cfg, cfg.out_dir);
  TrainResult result = train_run(cfg);
  std::printf("final checkpoint: %s\n", result.final_checkpoint.c_str());
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& split) {
  RunConfig cfg = resolve_config(flags);
  check(!flags.checkpoint.empty(), "eval requires --checkpoint");
  std::string out = flags.out_dir.empty() ? cfg.out_dir : flags.out_dir;

  Model model(cfg.model_config(), derive_seed(cfg.seed, "model"));
  load_checkpoint_into(flags.checkpoint, model.named_params());

  std::string dir = split == "train" ? cfg.train_dir() : cfg.test_dir();
  std::vector<VideoClip> clips = load_dataset(dir);
  EvalOptions opt = eval_options(cfg);
  EvalReport rep = evaluate_clips(model, clips, opt);

  fs::create_directories(out);
  echo_config(cfg, out);
  write_eval_outputs(rep, opt, out, split);
  std::fputs(format_eval_report(rep, opt.map_iou, opt.recall_score).c_str(), stdout);
  return 0;
}

int cmd_selftest(const CommonFlags& flags) {
  uint64_t seed = flags.seed_set ? flags.seed : 1;
  return run_selftest(seed) == 0 ? 0 : 3;
}

int cmd_visualize(const CommonFlags& flags, const std::string& clip_id, int frame) {
  RunConfig cfg = resolve_config(flags);
  check(!flags.checkpoint.empty(), "visualize requires --checkpoint");
  std::string out = flags.out_dir.empty() ? cfg.out_dir + "/viz" : flags.out_dir;

  Model model(cfg.model_config(), derive_seed(cfg.seed, "model"));
  load_checkpoint_into(flags.checkpoint, model.named_params());

  VideoClip clip;
  bool found = false;
  for (const std::string& dir : {cfg.train_dir(), cfg.test_dir()}) {
    if (!fs::exists(dir + "/dataset_index.txt")) continue;
    for (VideoClip& c : load_dataset(dir)) {
      if (c.id == clip_id) {
        clip = std::move(c);
        found = true;
        break;
      }
    }
    if (found) break;
  }
  check(found, "clip " + clip_id + " not found in " + cfg.dataset_dir);

  VisualizeResult res = visualize_attention(model, clip, frame, eval_options(cfg), out);
  for (const std::string& f : res.attention_files) std::printf("%s\n", f.c_str());
  std::printf("%s\n", res.frame_file.c_str());
  if (res.flat_maps > 0) {
    std::printf("note: %zu attention map%s constant (untrained transform?), written as zeros\n",
                res.flat_maps, res.flat_maps == 1 ? " is" : "s are");
  }
  return 0;
}

struct AblateRow {
  std::string label;
  double map = 0.0;
  double low_vis_recall = 0.0;
  double mid_vis_recall = 0.0;
  double high_vis_recall = 0.0;
};

int cmd_ablate(const CommonFlags& flags, const std::vector<std::string>& axes) {
  static const std::vector<std::string> kValid = {"insertion_point", "embedding_strategy",
                                                  "T_train", "T_test", "order"};
  for (const std::string& a : axes) {
    bool ok = false;
    for (const std::string& v : kValid) ok = ok || a == v;
    if (!ok) {
      std::string valid;
      for (const std::string& v : kValid) valid += (valid.empty() ? "" : ", ") + v;
      std::fprintf(stderr, "error: unknown ablation axis `%s` (valid axes: %s)\n", a.c_str(),
                   valid.c_str());
      return 1;
    }
  }

  RunConfig base = resolve_config(flags);
  if (!flags.out_dir.empty()) base.out_dir = flags.out_dir;
  prepare_out_dir(base.out_dir, flags.force);
  echo_config(base, base.out_dir);

  // Cross product of per-axis variants; absent axes pin the base value.
  std::vector<RunConfig> combos{base};
  std::vector<std::vector<std::string>> labels{{}};
  auto expand = [&](const std::string& axis, auto&& apply, const auto& values,
                    auto&& label_of) {
    bool active = false;
    for (const std::string& a : axes) active = active || a == axis;
    if (!active) return;
    std::vector<RunConfig> next;
    std::vector<std::vector<std::string>> next_labels;
    for (size_t i = 0; i < combos.size(); ++i) {
      for (const auto& v : values) {
        RunConfig c = combos[i];
        apply(c, v);
        next.push_back(c);
        auto l = labels[i];
        l.push_back(axis + "=" + label_of(v));
        next_labels.push_back(l);
      }
    }
    combos = std::move(next);
    labels = std::move(next_labels);
  };

  expand("insertion_point",
         [](RunConfig& c, InsertionPoint v) { c.insertion = v; },
         std::vector<InsertionPoint>{InsertionPoint::AfterAdd, InsertionPoint::After1x1,
                                     InsertionPoint::After3x3},
         [](InsertionPoint v) { return std::string(to_string(v)); });
  expand("embedding_strategy",
         [](RunConfig& c, EmbeddingStrategy v) { c.embedding = v; },
         std::vector<EmbeddingStrategy>{EmbeddingStrategy::Positional,
                                        EmbeddingStrategy::MainAndRefs},
         [](EmbeddingStrategy v) { return std::string(to_string(v)); });
  expand("T_train", [](RunConfig& c, size_t v) { c.t_train = v; }, std::vector<size_t>{3, 5},
         [](size_t v) { return std::to_string(v); });
  expand("T_test", [](RunConfig& c, size_t v) { c.t_test = v; }, std::vector<size_t>{1, 5, 9},
         [](size_t v) { return std::to_string(v); });
  expand("order", [](RunConfig& c, BlendOrder v) { c.order = v; },
         std::vector<BlendOrder>{BlendOrder::None, BlendOrder::ScmOnly, BlendOrder::TcmOnly,
                                 BlendOrder::TcmThenScm, BlendOrder::ScmThenTcm},
         [](BlendOrder v) { return std::string(to_string(v)); });

  std::vector<VideoClip> train_clips = load_dataset(base.train_dir());
  std::vector<VideoClip> test_clips = load_dataset(base.test_dir());

  // T_test only affects evaluation, so combos sharing everything else reuse
  // one trained model.
  std::map<std::string, std::string> trained;
  std::vector<AblateRow> rows;
  for (size_t i = 0; i < combos.size(); ++i) {
    RunConfig c = combos[i];
    c.validate();
    RunConfig train_cfg = c;
    train_cfg.t_test = 0;  // excluded from the training cache key
    train_cfg.out_dir.clear();
    std::string key = serialize_config(train_cfg);

    std::string run_dir = base.out_dir + "/run_" + std::to_string(i);
    std::string ckpt;
    auto it = trained.find(key);
    if (it != trained.end()) {
      ckpt = it->second;
    } else {
      RunConfig rc = c;
      rc.out_dir = run_dir;
      fs::create_directories(rc.out_dir);
      echo_config(rc, rc.out_dir);
      std::fprintf(stderr, "[ablate] training combo %zu/%zu\n", i + 1, combos.size());
      TrainResult tr = train_run(rc, train_clips, test_clips, rc.out_dir, false);
      ckpt = tr.final_checkpoint;
      trained.emplace(key, ckpt);
    }

    Model model(c.model_config(), derive_seed(c.seed, "model"));
    load_checkpoint_into(ckpt, model.named_params());
    EvalOptions opt = eval_options(c);
    EvalReport rep = evaluate_clips(model, test_clips, opt);

    AblateRow row;
    for (const std::string& part : labels[i]) row.label += (row.label.empty() ? "" : " ") + part;
    if (row.label.empty()) row.label = "baseline";
    row.map = rep.map;
    if (rep.recall_bins.size() == 3) {
      row.low_vis_recall = rep.recall_bins[0].recall();
      row.mid_vis_recall = rep.recall_bins[1].recall();
      row.high_vis_recall = rep.recall_bins[2].recall();
    }
    rows.push_back(row);
    std::fprintf(stderr, "[ablate] %s: mAP %.4f\n", row.label.c_str(), row.map);
  }

  std::ofstream txt(base.out_dir + "/ablation.txt", std::ios::binary);
  std::ofstream csv(base.out_dir + "/ablation.csv", std::ios::binary);
  check(txt.good() && csv.good(), "cannot write ablation outputs");
  csv << "combo,map,recall_vis_low,recall_vis_mid,recall_vis_high\n";
  char line[256];
  for (const AblateRow& r : rows) {
    std::snprintf(line, sizeof line, "%-60s mAP %.4f  recall(low/mid/high vis) %.4f/%.4f/%.4f\n",
                  r.label.c_str(), r.map, r.low_vis_recall, r.mid_vis_recall, r.high_vis_recall);
    txt << line;
    std::printf("%s", line);
    std::snprintf(line, sizeof line, "\"%s\",%.6f,%.6f,%.6f,%.6f\n", r.label.c_str(), r.map,
                  r.low_vis_recall, r.mid_vis_recall, r.high_vis_recall);
    csv << line;
  }
  check(txt.good() && csv.good(), "failed writing ablation outputs");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"video object detector with spatial/temporal feature blending"};
  app.require_subcommand(1);

  CommonFlags gen_f, train_f, eval_f, ablate_f, viz_f, self_f;
  std::string eval_split = "test";
  std::string viz_clip;
  int viz_frame = 0;
  std::vector<std::string> ablate_axes;

  CLI::App* gen = app.add_subcommand("gen", "generate the synthetic dataset");
  add_common(gen, gen_f, false);

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train, train_f, true);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, eval_f, true);
  eval->add_option("--split", eval_split, "dataset split (train|test)")
      ->check(CLI::IsMember({"train", "test"}));

  CLI::App* ablate = app.add_subcommand("ablate", "train/evaluate an ablation grid");
  add_common(ablate, ablate_f, false);
  ablate->add_option("--axes", ablate_axes,
                     "axes to sweep (insertion_point, embedding_strategy, T_train, T_test, order)")
      ->delimiter(',');

  CLI::App* viz = app.add_subcommand("visualize", "dump attention maps for one frame");
  add_common(viz, viz_f, true);
  viz->add_option("--clip", viz_clip, "clip id")->required();
  viz->add_option("--frame", viz_frame, "center frame index")->required();

  CLI::App* self = app.add_subcommand("selftest", "run oracle and gradient suites");
  add_common(self, self_f, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_f);
    if (train->parsed()) return cmd_train(train_f);
    if (eval->parsed()) return cmd_eval(eval_f, eval_split);
    if (ablate->parsed()) return cmd_ablate(ablate_f, ablate_axes);
    if (viz->parsed()) return cmd_visualize(viz_f, viz_clip, viz_frame);
    if (self->parsed()) return cmd_selftest(self_f);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
