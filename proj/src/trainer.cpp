#include "blendnet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "blendnet/annotations.hpp"
#include "blendnet/checkpoint.hpp"
#include "blendnet/common.hpp"
#include "blendnet/evaluator.hpp"
#include "blendnet/ops.hpp"
#include "blendnet/optim.hpp"
#include "blendnet/rng.hpp"

namespace blendnet {
namespace {

struct Sample {
  size_t clip = 0;
  int center = 0;
};

void shuffle_samples(std::vector<Sample>& s, Rng& rng) {
  for (size_t i = s.size(); i > 1; --i) {
    auto j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(s[i - 1], s[j]);
  }
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

TrainResult train_run(const RunConfig& cfg, const std::vector<VideoClip>& train_clips,
                      const std::vector<VideoClip>& val_clips, const std::string& out_dir,
                      bool verbose) {
  cfg.validate();
  check(!train_clips.empty(), "training split is empty");

  std::filesystem::create_directories(out_dir + "/checkpoints");

  Model model(cfg.model_config(), derive_seed(cfg.seed, "model"));
  if (!cfg.warm_start.empty()) load_checkpoint_into(cfg.warm_start, model.named_params());

  SgdMomentum opt(model.trainable(), cfg.momentum);
  LrSchedule sched = cfg.lr_schedule();

  std::vector<Sample> samples;
  for (size_t c = 0; c < train_clips.size(); ++c)
    for (size_t f = 0; f < train_clips[c].num_frames(); ++f)
      samples.push_back(Sample{c, static_cast<int>(f)});

  std::ofstream manifest(out_dir + "/manifest.txt", std::ios::binary);
  check(manifest.good(), "cannot write manifest in " + out_dir);
  manifest << "blendnet-manifest v1\n";
  manifest << "config_hash = " << hex64(config_hash(cfg)) << "\n";
  manifest << "lr_file = lr_schedule.txt\n";
  manifest << "timing_file = timing.txt\n";
  manifest.flush();

  std::ofstream lr_log(out_dir + "/lr_schedule.txt", std::ios::binary);
  check(lr_log.good(), "cannot write lr schedule in " + out_dir);

  std::ofstream timing(out_dir + "/timing.txt", std::ios::binary);
  check(timing.good(), "cannot write timing file in " + out_dir);

  size_t pad = cfg.pad_multiple();
  double accum_scale = 1.0 / static_cast<double>(cfg.grad_accum);
  size_t iter = 0;  // optimizer steps taken
  TrainResult result;
  auto run_start = std::chrono::steady_clock::now();
  char line[256];

  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto epoch_start = std::chrono::steady_clock::now();
    Rng order_rng(derive_seed(cfg.seed, "epoch-order", epoch));
    shuffle_samples(samples, order_rng);

    double loss_sum = 0.0;
    size_t in_group = 0;
    opt.zero_grad();

    for (size_t s = 0; s < samples.size(); ++s) {
      const Sample& smp = samples[s];
      const VideoClip& clip = train_clips[smp.clip];
      uint64_t aug_seed = derive_seed(cfg.seed, "augment", epoch, s);

      SnippetBatch snip = sample_snippet(clip, smp.center, cfg.t_train, cfg.sample_stride);
      snip = augment(snip, aug_seed);
      ModelInput input = prepare_input(snip, cfg.target_short, pad);

      Tape tape;
      LossParts parts;
      {
        Tape::Scope scope(tape);
        Pyramid pyr = model.forward_snippet(input.frames, snip.main_index());
        Tensor loss = model.loss(pyr, input.main_gt, &parts);
        if (cfg.grad_accum > 1) loss = scale(loss, accum_scale);
        if (!std::isfinite(parts.total)) {
          fail("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
               ", sample " + std::to_string(s) + ", clip " + clip.id + ", center " +
               std::to_string(smp.center) + ", augment seed 0x" + hex64(aug_seed));
        }
        tape.backward(loss);
      }
      loss_sum += parts.total;
      ++in_group;

      if (in_group == cfg.grad_accum || s + 1 == samples.size()) {
        double lr = sched.at(iter, epoch);
        std::snprintf(line, sizeof line, "%zu %zu %.17g\n", iter, epoch, lr);
        lr_log << line;
        opt.step(lr);
        opt.zero_grad();
        ++iter;
        in_group = 0;
      }
    }
    lr_log.flush();

    EpochStats stats;
    stats.mean_loss = loss_sum / static_cast<double>(samples.size());
    std::snprintf(line, sizeof line, "checkpoints/epoch_%02zu.ckpt", epoch);
    stats.checkpoint = line;
    save_checkpoint(out_dir + "/" + stats.checkpoint, model.named_params());

    if (!val_clips.empty()) {
      EvalReport rep = evaluate_clips(model, val_clips, eval_options(cfg));
      stats.val_map = rep.map;
    } else {
      stats.val_map = std::numeric_limits<double>::quiet_NaN();
    }

    std::snprintf(line, sizeof line, "epoch %02zu loss %.17g val_map %.17g checkpoint %s\n", epoch,
                  stats.mean_loss, stats.val_map, stats.checkpoint.c_str());
    manifest << line;
    manifest.flush();

    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    std::snprintf(line, sizeof line, "epoch %02zu %.2fs\n", epoch, secs);
    timing << line;
    timing.flush();
    if (verbose) {
      std::fprintf(stderr, "[train] epoch %zu/%zu  loss %.4f  val mAP %.4f  (%.1fs)\n", epoch,
                   cfg.epochs, stats.mean_loss, stats.val_map, secs);
    }
    result.epochs.push_back(stats);
  }

  result.final_checkpoint = out_dir + "/" + result.epochs.back().checkpoint;
  manifest << "final_checkpoint = " << result.epochs.back().checkpoint << "\n";
  manifest.flush();
  double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
  std::snprintf(line, sizeof line, "total %.2fs\n", total);
  timing << line;
  return result;
}

TrainResult train_run(const RunConfig& cfg, bool verbose) {
  std::vector<VideoClip> train_clips = load_dataset(cfg.train_dir());
  std::vector<VideoClip> val_clips;
  if (std::filesystem::exists(cfg.test_dir() + "/dataset_index.txt"))
    val_clips = load_dataset(cfg.test_dir());
  return train_run(cfg, train_clips, val_clips, cfg.out_dir, verbose);
}

}  // namespace blendnet
