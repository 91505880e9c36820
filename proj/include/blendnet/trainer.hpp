#pragma once

#include <string>
#include <vector>

#include "blendnet/config.hpp"
#include "blendnet/model.hpp"
#include "blendnet/video.hpp"

namespace blendnet {

struct EpochStats {
  double mean_loss = 0.0;
  double val_map = 0.0;
  std::string checkpoint;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  std::string final_checkpoint;
};

// Runs the full schedule: every frame of every training clip serves as a
// snippet center once per epoch, in a per-epoch shuffled order derived from
// the run seed. Writes per-epoch checkpoints, manifest.txt, lr_schedule.txt,
// and timing.txt under out_dir. Everything except timing.txt is
// byte-reproducible for a fixed (config, seed).
TrainResult train_run(const RunConfig& cfg, const std::vector<VideoClip>& train_clips,
                      const std::vector<VideoClip>& val_clips, const std::string& out_dir,
                      bool verbose = true);

// Loads the train/test splits from cfg.dataset_dir and delegates to the
// overload above with out_dir = cfg.out_dir.
TrainResult train_run(const RunConfig& cfg, bool verbose = true);

}  // namespace blendnet
