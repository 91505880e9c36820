#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "blendnet/anchors.hpp"
#include "blendnet/blend.hpp"
#include "blendnet/nms.hpp"
#include "blendnet/tensor.hpp"

namespace blendnet {

struct BlendSettings {
  BlendOrder order = BlendOrder::TcmThenScm;
  InsertionPoint insertion = InsertionPoint::AfterAdd;
  EmbeddingStrategy embedding = EmbeddingStrategy::Positional;
  size_t t_train = 5;
  size_t reduction = 4;
};

struct ModelConfig {
  size_t in_channels = 1;
  size_t num_classes = 1;
  std::vector<size_t> stage_widths{16, 32, 64, 128, 128};
  size_t pyramid_width = 64;
  size_t head_width = 64;
  BlendSettings blend;
  AnchorSpec anchor_spec;  // base sides already scaled to the input regime

  double fg_iou = 0.5, bg_iou = 0.4;
  double focal_alpha = 0.25, focal_gamma = 2.0;
  double smooth_l1_beta = 1.0 / 9.0;
  double cls_prior = 0.01;

  double score_floor = 0.05;
  double nms_iou = 0.5;
  size_t max_dets_per_frame = 100;
};

// One convolution plus the fixed per-channel scale that stands in for batch
// norm (1 / (init_std * sqrt(fan_in)), no learned statistics) and an
// optional bias. Prediction layers run without the scale.
struct ConvLayer {
  Tensor w;
  Tensor b;  // undefined for bias-free layers
  double gain = 1.0;
  size_t stride = 1;
  size_t pad = 1;
  bool k3 = true;

  Tensor forward(const Tensor& x) const;
  static ConvLayer conv3(size_t ci, size_t co, size_t stride, bool scaled, bool bias, Rng& rng);
  static ConvLayer conv1(size_t ci, size_t co, bool scaled, bool bias, Rng& rng);
};

struct Pyramid {
  std::vector<Tensor> levels;  // P3..P7
  std::vector<std::array<size_t, 2>> grid_sizes() const;
};

struct HeadOutputs {
  std::vector<Tensor> cls;  // per level [A*K, H, W] logits
  std::vector<Tensor> box;  // per level [A*4, H, W] deltas
};

struct LossParts {
  double cls = 0.0, box = 0.0, total = 0.0;
  size_t num_fg = 0;
};

// Desk-scale feature-pyramid detector: five stride-2 conv stages, a final
// residual block exposing the three blend insertion sites, FPN levels P3..P7
// at a shared width, and a two-stream head shared across levels.
class Model {
 public:
  Model(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  size_t site_channels() const { return site_channels_; }

  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> trainable() const;

  // Per-frame features up to the blend insertion site. c3/c4/u are the
  // pieces the main frame needs to finish the pyramid afterwards.
  struct SiteFeatures {
    Tensor c3, c4, u, site;
  };
  SiteFeatures backbone_to_site(const Tensor& frame) const;

  // Completes stage 5 from a (possibly blended) site feature.
  Tensor finish_stage5(const SiteFeatures& main, const Tensor& site) const;

  Pyramid pyramid_from(const SiteFeatures& main, const Tensor& c5) const;

  // Blends precomputed per-frame site features and finishes the main-frame
  // pyramid; the evaluator feeds this from its per-clip cache.
  Pyramid pyramid_from_sites(const std::vector<SiteFeatures>& sites, size_t main_idx) const;

  // Full snippet forward. Reference frames run tape-free under MainAndRefs,
  // so no gradient ever reaches them or their backbone work.
  Pyramid forward_snippet(const std::vector<Tensor>& frames, size_t main_idx) const;

  // Single-frame forward with no blend machinery on the path.
  Pyramid forward_single(const Tensor& frame) const;

  HeadOutputs head_forward(const Pyramid& pyr) const;

  Tensor loss(const Pyramid& pyr, const std::vector<GtBox>& gts, LossParts* parts = nullptr) const;

  // Decoded, clipped, per-class-NMSed detections for the main frame.
  std::vector<Detection> detect(const Pyramid& pyr, size_t img_w, size_t img_h) const;

  // TCM attention maps at the insertion site, one [H,W] tensor per frame.
  std::vector<Tensor> attention_maps(const std::vector<Tensor>& frames, size_t main_idx) const;

  bool has_scm() const { return has_scm_; }
  bool has_tcm() const { return has_tcm_; }
  ScmWeights& scm();
  TcmWeights& tcm();

 private:
  ModelConfig cfg_;
  size_t site_channels_ = 0;

  std::vector<ConvLayer> stages_;
  ConvLayer res_reduce_, res_conv_, res_expand_;
  ConvLayer lat3_, lat4_, lat5_, smooth3_, smooth4_, smooth5_, p6_, p7_;
  std::vector<ConvLayer> cls_tower_, box_tower_;
  ConvLayer cls_pred_, box_pred_;

  ScmWeights scm_;
  TcmWeights tcm_;
  bool has_scm_ = false, has_tcm_ = false;
};

}  // namespace blendnet
