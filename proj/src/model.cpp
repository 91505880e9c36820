#include "blendnet/model.hpp"

#include <algorithm>
#include <cmath>

#include "blendnet/common.hpp"
#include "blendnet/ops.hpp"

namespace blendnet {

namespace {

constexpr double kInitStd = 0.01;

Tensor normal_tensor(std::vector<size_t> shape, Rng& rng) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, kInitStd);
  Tensor t = Tensor::from_data(std::move(shape), std::move(v), true);
  return t;
}

}  // namespace

Tensor ConvLayer::forward(const Tensor& x) const {
  Tensor y = k3 ? conv3x3(x, w, stride, pad) : conv1x1(x, w);
  if (gain != 1.0) y = scale(y, gain);
  if (b.defined()) y = broadcast_add(y, b);
  return y;
}

ConvLayer ConvLayer::conv3(size_t ci, size_t co, size_t stride, bool scaled, bool bias, Rng& rng) {
  ConvLayer l;
  l.k3 = true;
  l.stride = stride;
  l.pad = 1;
  l.w = normal_tensor({co, ci, 3, 3}, rng);
  l.gain = scaled ? 1.0 / (kInitStd * std::sqrt(static_cast<double>(ci * 9))) : 1.0;
  if (bias) l.b = Tensor::zeros({co}, true);
  return l;
}

ConvLayer ConvLayer::conv1(size_t ci, size_t co, bool scaled, bool bias, Rng& rng) {
  ConvLayer l;
  l.k3 = false;
  l.stride = 1;
  l.pad = 0;
  l.w = normal_tensor({co, ci}, rng);
  l.gain = scaled ? 1.0 / (kInitStd * std::sqrt(static_cast<double>(ci))) : 1.0;
  if (bias) l.b = Tensor::zeros({co}, true);
  return l;
}

std::vector<std::array<size_t, 2>> Pyramid::grid_sizes() const {
  std::vector<std::array<size_t, 2>> out;
  out.reserve(levels.size());
  for (const Tensor& t : levels) out.push_back({t.shape()[1], t.shape()[2]});
  return out;
}

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  check(cfg_.stage_widths.size() == 5, "Model: expected 5 stage widths, got ",
        cfg_.stage_widths.size());
  check(cfg_.blend.t_train % 2 == 1, "Model: t_train must be odd, got ", cfg_.blend.t_train);
  const size_t c5w = cfg_.stage_widths[4];
  const size_t mid = c5w / 2;

  // Independent init streams per component, so adding or removing the blend
  // modules never shifts the draws of the shared detector weights.
  Rng rb(derive_seed(seed, "backbone"));
  size_t ci = cfg_.in_channels;
  for (size_t s = 0; s < 5; ++s) {
    stages_.push_back(ConvLayer::conv3(ci, cfg_.stage_widths[s], 2, true, false, rb));
    ci = cfg_.stage_widths[s];
  }
  res_reduce_ = ConvLayer::conv1(c5w, mid, true, false, rb);
  res_conv_ = ConvLayer::conv3(mid, mid, 1, true, false, rb);
  res_expand_ = ConvLayer::conv1(mid, c5w, true, false, rb);

  Rng rf(derive_seed(seed, "fpn"));
  const size_t pw = cfg_.pyramid_width;
  lat3_ = ConvLayer::conv1(cfg_.stage_widths[2], pw, true, false, rf);
  lat4_ = ConvLayer::conv1(cfg_.stage_widths[3], pw, true, false, rf);
  lat5_ = ConvLayer::conv1(c5w, pw, true, false, rf);
  smooth3_ = ConvLayer::conv3(pw, pw, 1, true, false, rf);
  smooth4_ = ConvLayer::conv3(pw, pw, 1, true, false, rf);
  smooth5_ = ConvLayer::conv3(pw, pw, 1, true, false, rf);
  p6_ = ConvLayer::conv3(c5w, pw, 2, true, false, rf);
  p7_ = ConvLayer::conv3(pw, pw, 2, true, false, rf);

  Rng rh(derive_seed(seed, "head"));
  const size_t hw = cfg_.head_width;
  const size_t A = cfg_.anchor_spec.per_location();
  for (size_t i = 0; i < 4; ++i)
    cls_tower_.push_back(ConvLayer::conv3(i == 0 ? pw : hw, hw, 1, true, true, rh));
  for (size_t i = 0; i < 4; ++i)
    box_tower_.push_back(ConvLayer::conv3(i == 0 ? pw : hw, hw, 1, true, true, rh));
  cls_pred_ = ConvLayer::conv3(hw, A * cfg_.num_classes, 1, false, true, rh);
  box_pred_ = ConvLayer::conv3(hw, A * 4, 1, false, true, rh);
  // Focal-loss prior: every anchor starts near P(foreground) = cls_prior.
  const double prior_bias = -std::log((1.0 - cfg_.cls_prior) / cfg_.cls_prior);
  std::fill(cls_pred_.b.values().begin(), cls_pred_.b.values().end(), prior_bias);

  switch (cfg_.blend.insertion) {
    case InsertionPoint::After3x3: site_channels_ = mid; break;
    case InsertionPoint::After1x1:
    case InsertionPoint::AfterAdd: site_channels_ = c5w; break;
  }
  has_scm_ = cfg_.blend.order == BlendOrder::ScmOnly ||
             cfg_.blend.order == BlendOrder::TcmThenScm ||
             cfg_.blend.order == BlendOrder::ScmThenTcm;
  has_tcm_ = cfg_.blend.order == BlendOrder::TcmOnly ||
             cfg_.blend.order == BlendOrder::TcmThenScm ||
             cfg_.blend.order == BlendOrder::ScmThenTcm;
  Rng rbl(derive_seed(seed, "blend"));
  if (has_scm_) scm_ = ScmWeights::build(site_channels_, cfg_.blend.reduction, rbl);
  if (has_tcm_) tcm_ = TcmWeights::build(site_channels_, cfg_.blend.t_train, rbl);
}

ScmWeights& Model::scm() {
  check(has_scm_, "Model: blend order ", to_string(cfg_.blend.order), " has no SCM");
  return scm_;
}

TcmWeights& Model::tcm() {
  check(has_tcm_, "Model: blend order ", to_string(cfg_.blend.order), " has no TCM");
  return tcm_;
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto push = [&](const std::string& name, const ConvLayer& l) {
    out.emplace_back(name + ".w", l.w);
    if (l.b.defined()) out.emplace_back(name + ".b", l.b);
  };
  for (size_t s = 0; s < stages_.size(); ++s) push("backbone.stage" + std::to_string(s + 1), stages_[s]);
  push("backbone.res.reduce", res_reduce_);
  push("backbone.res.conv", res_conv_);
  push("backbone.res.expand", res_expand_);
  push("fpn.lat3", lat3_);
  push("fpn.lat4", lat4_);
  push("fpn.lat5", lat5_);
  push("fpn.smooth3", smooth3_);
  push("fpn.smooth4", smooth4_);
  push("fpn.smooth5", smooth5_);
  push("fpn.p6", p6_);
  push("fpn.p7", p7_);
  for (size_t i = 0; i < cls_tower_.size(); ++i) push("head.cls" + std::to_string(i), cls_tower_[i]);
  for (size_t i = 0; i < box_tower_.size(); ++i) push("head.box" + std::to_string(i), box_tower_[i]);
  push("head.cls_pred", cls_pred_);
  push("head.box_pred", box_pred_);
  if (has_scm_)
    for (auto& p : scm_.named_params("scm")) out.push_back(p);
  if (has_tcm_)
    for (auto& p : tcm_.named_params("tcm")) out.push_back(p);
  return out;
}

std::vector<Tensor> Model::trainable() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

Model::SiteFeatures Model::backbone_to_site(const Tensor& frame) const {
  check(frame.ndim() == 3, "backbone: expected [C,H,W] frame, got ", shape_str(frame.shape()));
  check(frame.shape()[0] == cfg_.in_channels, "backbone: expected ", cfg_.in_channels,
        " input channels, got ", frame.shape()[0]);
  check(frame.shape()[1] >= 64 && frame.shape()[2] >= 64,
        "backbone: frame ", frame.shape()[1], "x", frame.shape()[2],
        " is below 64x64, the pyramid degenerates");

  SiteFeatures f;
  Tensor x = frame;
  for (size_t s = 0; s < stages_.size(); ++s) {
    x = relu(stages_[s].forward(x));
    if (s == 2) f.c3 = x;
    if (s == 3) f.c4 = x;
  }
  f.u = x;

  Tensor r = relu(res_reduce_.forward(f.u));
  Tensor t3 = res_conv_.forward(r);
  if (cfg_.blend.insertion == InsertionPoint::After3x3) {
    f.site = t3;
    return f;
  }
  Tensor t1 = res_expand_.forward(relu(t3));
  if (cfg_.blend.insertion == InsertionPoint::After1x1) {
    f.site = t1;
    return f;
  }
  f.site = relu(add(f.u, t1));  // AfterAdd
  return f;
}

Tensor Model::finish_stage5(const SiteFeatures& main, const Tensor& site) const {
  switch (cfg_.blend.insertion) {
    case InsertionPoint::After3x3: {
      Tensor t1 = res_expand_.forward(relu(site));
      return relu(add(main.u, t1));
    }
    case InsertionPoint::After1x1:
      return relu(add(main.u, site));
    case InsertionPoint::AfterAdd:
      return site;
  }
  fail("finish_stage5: bad insertion point");
}

Pyramid Model::pyramid_from(const SiteFeatures& main, const Tensor& c5) const {
  Tensor t5 = lat5_.forward(c5);
  Tensor t4 = add(lat4_.forward(main.c4), upsample_nearest(t5, main.c4.shape()[1], main.c4.shape()[2]));
  Tensor t3 = add(lat3_.forward(main.c3), upsample_nearest(t4, main.c3.shape()[1], main.c3.shape()[2]));
  Pyramid pyr;
  pyr.levels.push_back(smooth3_.forward(t3));
  pyr.levels.push_back(smooth4_.forward(t4));
  pyr.levels.push_back(smooth5_.forward(t5));
  Tensor p6 = p6_.forward(c5);
  pyr.levels.push_back(p6);
  pyr.levels.push_back(p7_.forward(relu(p6)));
  return pyr;
}

Pyramid Model::pyramid_from_sites(const std::vector<SiteFeatures>& sites, size_t main_idx) const {
  check(main_idx < sites.size(), "pyramid_from_sites: main index ", main_idx, " out of range");
  std::vector<Tensor> site_feats;
  site_feats.reserve(sites.size());
  for (const auto& s : sites) site_feats.push_back(s.site);
  Tensor blended = blend_apply(site_feats, main_idx, cfg_.blend.order, has_scm_ ? &scm_ : nullptr,
                               has_tcm_ ? &tcm_ : nullptr, cfg_.blend.embedding);
  Tensor c5 = finish_stage5(sites[main_idx], blended);
  return pyramid_from(sites[main_idx], c5);
}

Pyramid Model::forward_snippet(const std::vector<Tensor>& frames, size_t main_idx) const {
  check(!frames.empty() && frames.size() % 2 == 1, "forward_snippet: snippet length ",
        frames.size(), " must be odd");
  check(main_idx < frames.size(), "forward_snippet: main index out of range");
  std::vector<SiteFeatures> sites(frames.size());
  const bool refs_tape_free = cfg_.blend.embedding == EmbeddingStrategy::MainAndRefs;
  for (size_t i = 0; i < frames.size(); ++i) {
    if (i != main_idx && refs_tape_free) {
      Tape::Pause pause;
      sites[i] = backbone_to_site(frames[i]);
    } else {
      sites[i] = backbone_to_site(frames[i]);
    }
  }
  return pyramid_from_sites(sites, main_idx);
}

Pyramid Model::forward_single(const Tensor& frame) const {
  SiteFeatures f = backbone_to_site(frame);
  Tensor c5 = finish_stage5(f, f.site);
  return pyramid_from(f, c5);
}

HeadOutputs Model::head_forward(const Pyramid& pyr) const {
  HeadOutputs out;
  for (const Tensor& level : pyr.levels) {
    Tensor tc = level;
    for (const ConvLayer& l : cls_tower_) tc = relu(l.forward(tc));
    out.cls.push_back(cls_pred_.forward(tc));
    Tensor tb = level;
    for (const ConvLayer& l : box_tower_) tb = relu(l.forward(tb));
    out.box.push_back(box_pred_.forward(tb));
  }
  return out;
}

Tensor Model::loss(const Pyramid& pyr, const std::vector<GtBox>& gts, LossParts* parts) const {
  HeadOutputs ho = head_forward(pyr);
  const std::vector<LevelAnchors> levels = generate_anchors(pyr.grid_sizes(), cfg_.anchor_spec);
  std::vector<BBox> all_anchors;
  all_anchors.reserve(total_anchor_count(levels));
  for (const auto& l : levels)
    all_anchors.insert(all_anchors.end(), l.boxes.begin(), l.boxes.end());
  const DetectionTargets tgt = assign_targets(all_anchors, gts, cfg_.fg_iou, cfg_.bg_iou);
  const double normalizer = static_cast<double>(std::max<size_t>(1, tgt.num_fg));

  const size_t A = cfg_.anchor_spec.per_location();
  const size_t K = cfg_.num_classes;
  std::vector<Tensor> cls_losses, box_losses;
  size_t base = 0;
  for (size_t l = 0; l < levels.size(); ++l) {
    const size_t n_loc = levels[l].h * levels[l].w;
    // Rearranged into the head's channel-major layout: anchors enumerate as
    // (y, x, a) in the anchor list, channel (a*K + k) at position (y, x)
    // in the head output.
    std::vector<int8_t> cls_target(A * K * n_loc, 0);
    std::vector<double> box_target(A * 4 * n_loc, 0.0);
    std::vector<uint8_t> box_mask(A * 4 * n_loc, 0);
    for (size_t pos = 0; pos < n_loc; ++pos) {
      for (size_t a = 0; a < A; ++a) {
        const size_t anchor_idx = base + pos * A + a;
        const int32_t label = tgt.labels[anchor_idx];
        for (size_t k = 0; k < K; ++k) {
          int8_t t = 0;
          if (label == kIgnore)
            t = -1;
          else if (label == static_cast<int32_t>(k))
            t = 1;
          cls_target[(a * K + k) * n_loc + pos] = t;
        }
        if (label >= 0) {
          for (size_t c = 0; c < 4; ++c) {
            box_target[(a * 4 + c) * n_loc + pos] = tgt.deltas[anchor_idx][c];
            box_mask[(a * 4 + c) * n_loc + pos] = 1;
          }
        }
      }
    }
    cls_losses.push_back(
        focal_loss(ho.cls[l], cls_target, cfg_.focal_alpha, cfg_.focal_gamma, normalizer));
    box_losses.push_back(
        smooth_l1_loss(ho.box[l], box_target, box_mask, cfg_.smooth_l1_beta, normalizer));
    base += n_loc * A;
  }
  Tensor cls_total = add_n(cls_losses);
  Tensor box_total = add_n(box_losses);
  Tensor total = add(cls_total, box_total);
  if (parts) {
    parts->cls = cls_total.item();
    parts->box = box_total.item();
    parts->total = total.item();
    parts->num_fg = tgt.num_fg;
  }
  return total;
}

std::vector<Detection> Model::detect(const Pyramid& pyr, size_t img_w, size_t img_h) const {
  Tape::Pause pause;  // inference only, keep any ambient tape clean
  HeadOutputs ho = head_forward(pyr);
  const std::vector<LevelAnchors> levels = generate_anchors(pyr.grid_sizes(), cfg_.anchor_spec);
  const size_t A = cfg_.anchor_spec.per_location();
  const size_t K = cfg_.num_classes;

  std::vector<std::vector<Detection>> per_class(K);
  for (size_t l = 0; l < levels.size(); ++l) {
    const Tensor probs = sigmoid(ho.cls[l]);
    const double* pv = probs.data();
    const double* bv = ho.box[l].data();
    const size_t n_loc = levels[l].h * levels[l].w;
    for (size_t pos = 0; pos < n_loc; ++pos) {
      for (size_t a = 0; a < A; ++a) {
        const BBox& anchor = levels[l].boxes[pos * A + a];
        for (size_t k = 0; k < K; ++k) {
          const double score = pv[(a * K + k) * n_loc + pos];
          if (score < cfg_.score_floor) continue;
          std::array<double, 4> d;
          for (size_t c = 0; c < 4; ++c) d[c] = bv[(a * 4 + c) * n_loc + pos];
          BBox box = decode_box(anchor, d);
          box.x0 = std::clamp(box.x0, 0.0, static_cast<double>(img_w));
          box.y0 = std::clamp(box.y0, 0.0, static_cast<double>(img_h));
          box.x1 = std::clamp(box.x1, 0.0, static_cast<double>(img_w));
          box.y1 = std::clamp(box.y1, 0.0, static_cast<double>(img_h));
          if (!box.valid()) continue;
          Detection det;
          det.box = box;
          det.cls = static_cast<int>(k);
          det.score = score;
          per_class[k].push_back(det);
        }
      }
    }
  }

  std::vector<Detection> merged;
  for (size_t k = 0; k < K; ++k) {
    std::vector<Detection> kept = nms(per_class[k], cfg_.nms_iou);
    merged.insert(merged.end(), kept.begin(), kept.end());
  }
  std::stable_sort(merged.begin(), merged.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (merged.size() > cfg_.max_dets_per_frame) merged.resize(cfg_.max_dets_per_frame);
  return merged;
}

std::vector<Tensor> Model::attention_maps(const std::vector<Tensor>& frames, size_t main_idx) const {
  check(has_tcm_, "attention_maps: blend order ", to_string(cfg_.blend.order), " has no TCM");
  Tape::Pause pause;
  std::vector<Tensor> site_feats;
  site_feats.reserve(frames.size());
  for (const Tensor& f : frames) {
    SiteFeatures s = backbone_to_site(f);
    // ScmThenTcm feeds spatially blended features into the TCM, so the maps
    // must be computed on the same inputs the TCM sees.
    site_feats.push_back(cfg_.blend.order == BlendOrder::ScmThenTcm ? scm_forward(s.site, scm_)
                                                                    : s.site);
  }
  return tcm_attention_maps(site_feats, main_idx, tcm_);
}

}  // namespace blendnet
