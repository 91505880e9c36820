#include "blendnet/blend.hpp"

#include "blendnet/ops.hpp"

namespace blendnet {

namespace {

Tensor normal_tensor(std::vector<size_t> shape, Rng& rng, double stddev) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

constexpr double kInitStd = 0.01;

}  // namespace

ScmWeights ScmWeights::build(size_t channels, size_t reduction, Rng& rng) {
  check(reduction >= 1, "scm: reduction must be >= 1, got ", reduction);
  check(channels % reduction == 0, "scm: channels ", channels, " not divisible by reduction ",
        reduction);
  const size_t ce = channels / reduction;
  ScmWeights w;
  w.w1 = normal_tensor({1, channels}, rng, kInitStd);
  w.w2 = normal_tensor({ce, channels}, rng, kInitStd);
  w.w3 = normal_tensor({channels, ce}, rng, kInitStd);
  return w;
}

std::vector<std::pair<std::string, Tensor>> ScmWeights::named_params(
    const std::string& prefix) const {
  return {{prefix + ".w1", w1}, {prefix + ".w2", w2}, {prefix + ".w3", w3}};
}

TcmWeights TcmWeights::build(size_t channels, size_t t_train, Rng& rng) {
  check(t_train >= 1 && t_train % 2 == 1, "tcm: temporal window must be odd, got ", t_train);
  TcmWeights w;
  w.max_offset = static_cast<int>((t_train - 1) / 2);
  const size_t banks = t_train;
  for (size_t i = 0; i < banks; ++i) w.w4.push_back(normal_tensor({1, channels}, rng, kInitStd));
  for (size_t i = 0; i < banks; ++i)
    w.w5.push_back(normal_tensor({channels, channels}, rng, kInitStd));
  for (size_t i = 0; i < banks; ++i)
    w.w6.push_back(normal_tensor({channels, channels}, rng, kInitStd));
  return w;
}

size_t TcmWeights::clamp_idx(int offset) const {
  if (offset < -max_offset) offset = -max_offset;
  if (offset > max_offset) offset = max_offset;
  return static_cast<size_t>(offset + max_offset);
}

std::vector<std::pair<std::string, Tensor>> TcmWeights::named_params(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (int off = -max_offset; off <= max_offset; ++off) {
    const std::string suffix = "." + std::to_string(off);
    out.emplace_back(prefix + ".w4" + suffix, w4[clamp_idx(off)]);
    out.emplace_back(prefix + ".w5" + suffix, w5[clamp_idx(off)]);
    out.emplace_back(prefix + ".w6" + suffix, w6[clamp_idx(off)]);
  }
  return out;
}

Tensor scm_forward(const Tensor& x, const ScmWeights& w) {
  check(x.ndim() == 3, "scm_forward: input must be [C,H,W], got ", shape_str(x.shape()));
  const size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  check(w.w1.dim(1) == C, "scm_forward: input channels ", C, " do not match w1 shape ",
        shape_str(w.w1.shape()));

  // Attention over all H*W positions.
  Tensor logits = reshape(conv1x1(x, w.w1), {H * W});
  Tensor alpha = reshape(softmax(logits, 0), {H * W, 1});
  // Embedded positions, then the softmax-weighted global context.
  Tensor embedded = reshape(conv1x1(x, w.w2), {w.w2.dim(0), H * W});
  Tensor context = matmul(embedded, alpha);           // [Ce,1]
  Tensor lifted = reshape(matmul(w.w3, context), {C});
  return broadcast_add(x, lifted);
}

Tensor temporal_softmax(const Tensor& embed) {
  check(embed.ndim() == 3, "temporal_softmax: input must be [T,H,W], got ",
        shape_str(embed.shape()));
  check(embed.dim(0) >= 1, "temporal_softmax: empty frame axis");
  return softmax(embed, 0);
}

Tensor temporal_attention_map(const Tensor& tsoft) {
  check(tsoft.ndim() == 3, "temporal_attention_map: input must be [T,H,W], got ",
        shape_str(tsoft.shape()));
  // (1/(H*W)) * sum_j c[t,j] is exactly the per-frame spatial mean.
  Tensor frame_mass = mean_over(tsoft, {1, 2});  // [T]
  return broadcast_mul(tsoft, frame_mass);
}

namespace {

// Shared plumbing for tcm_forward and the visualizer: the per-frame inputs
// (with stop_gradient applied to references when asked) and the attention
// maps of Eqs. 3-4.
struct TcmCore {
  std::vector<Tensor> inputs;
  Tensor xhat;  // [T,H,W]
};

TcmCore tcm_core(const std::vector<Tensor>& frames, size_t main_idx, const TcmWeights& w,
                 EmbeddingStrategy embedding) {
  check(!frames.empty(), "tcm: empty frame window");
  check(main_idx < frames.size(), "tcm: main index ", main_idx, " out of range for window of ",
        frames.size());
  const Tensor& main = frames[main_idx];
  check(main.ndim() == 3, "tcm: frame features must be [C,H,W], got ", shape_str(main.shape()));
  const size_t C = main.dim(0), H = main.dim(1), W = main.dim(2);
  check(w.w4.at(0).dim(1) == C, "tcm: feature channels ", C, " do not match weight channels ",
        w.w4.at(0).dim(1));

  TcmCore core;
  core.inputs.reserve(frames.size());
  std::vector<Tensor> embeds;
  embeds.reserve(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    check(frames[i].shape() == main.shape(), "tcm: frame ", i, " shape ",
          shape_str(frames[i].shape()), " differs from main frame shape ",
          shape_str(main.shape()));
    Tensor in = frames[i];
    if (embedding == EmbeddingStrategy::MainAndRefs && i != main_idx) in = stop_gradient(in);
    core.inputs.push_back(in);
    const int offset = static_cast<int>(i) - static_cast<int>(main_idx);
    embeds.push_back(reshape(conv1x1(in, w.w4_at(offset)), {H, W}));
  }
  Tensor tsoft = temporal_softmax(stack0(embeds));
  core.xhat = temporal_attention_map(tsoft);
  return core;
}

}  // namespace

Tensor tcm_forward(const std::vector<Tensor>& frames, size_t main_idx, const TcmWeights& w,
                   EmbeddingStrategy embedding) {
  TcmCore core = tcm_core(frames, main_idx, w, embedding);
  const Tensor& main = frames[main_idx];
  const size_t C = main.dim(0), H = main.dim(1), W = main.dim(2);

  std::vector<Tensor> contributions;
  contributions.reserve(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    const int offset = static_cast<int>(i) - static_cast<int>(main_idx);
    const Tensor& in = core.inputs[i];
    Tensor flat = reshape(in, {C, H * W});
    Tensor weights_i = reshape(take0(core.xhat, i), {H * W, 1});
    Tensor attended = matmul(flat, weights_i);                       // [C,1]
    Tensor ctx = reshape(matmul(w.w5_at(offset), attended), {C});    // w5 * attended
    Tensor enriched = broadcast_add(in, ctx);                        // x_m (+) ...
    contributions.push_back(conv1x1(enriched, w.w6_at(offset)));     // w6 * ...
  }
  return add(main, add_n(contributions));
}

std::vector<Tensor> tcm_attention_maps(const std::vector<Tensor>& frames, size_t main_idx,
                                       const TcmWeights& w) {
  Tape::Pause pause;
  TcmCore core = tcm_core(frames, main_idx, w, EmbeddingStrategy::Positional);
  std::vector<Tensor> maps;
  maps.reserve(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) maps.push_back(take0(core.xhat, i));
  return maps;
}

Tensor blend_apply(const std::vector<Tensor>& frames, size_t main_idx, BlendOrder order,
                   const ScmWeights* scm, const TcmWeights* tcm, EmbeddingStrategy embedding) {
  check(main_idx < frames.size(), "blend_apply: main index ", main_idx,
        " out of range for window of ", frames.size());
  switch (order) {
    case BlendOrder::None:
      return frames[main_idx];
    case BlendOrder::ScmOnly:
      check(scm, "blend_apply: SCM weights missing");
      return scm_forward(frames[main_idx], *scm);
    case BlendOrder::TcmOnly:
      check(tcm, "blend_apply: TCM weights missing");
      return tcm_forward(frames, main_idx, *tcm, embedding);
    case BlendOrder::TcmThenScm: {
      check(scm && tcm, "blend_apply: SCM and TCM weights required");
      Tensor t = tcm_forward(frames, main_idx, *tcm, embedding);
      return scm_forward(t, *scm);
    }
    case BlendOrder::ScmThenTcm: {
      check(scm && tcm, "blend_apply: SCM and TCM weights required");
      std::vector<Tensor> refined;
      refined.reserve(frames.size());
      for (const Tensor& f : frames) refined.push_back(scm_forward(f, *scm));
      return tcm_forward(refined, main_idx, *tcm, embedding);
    }
  }
  fail("blend_apply: unhandled order");
}

const char* to_string(BlendOrder o) {
  switch (o) {
    case BlendOrder::None: return "none";
    case BlendOrder::ScmOnly: return "scm_only";
    case BlendOrder::TcmOnly: return "tcm_only";
    case BlendOrder::TcmThenScm: return "tcm_scm";
    case BlendOrder::ScmThenTcm: return "scm_tcm";
  }
  return "?";
}

const char* to_string(InsertionPoint p) {
  switch (p) {
    case InsertionPoint::AfterAdd: return "after_add";
    case InsertionPoint::After1x1: return "after_1x1";
    case InsertionPoint::After3x3: return "after_3x3";
  }
  return "?";
}

const char* to_string(EmbeddingStrategy e) {
  switch (e) {
    case EmbeddingStrategy::Positional: return "positional";
    case EmbeddingStrategy::MainAndRefs: return "main_refs";
  }
  return "?";
}

}  // namespace blendnet
