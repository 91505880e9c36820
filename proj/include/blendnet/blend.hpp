#pragma once

#include <string>
#include <utility>
#include <vector>

#include "blendnet/rng.hpp"
#include "blendnet/tensor.hpp"

namespace blendnet {

enum class BlendOrder { None, ScmOnly, TcmOnly, TcmThenScm, ScmThenTcm };
enum class InsertionPoint { AfterAdd, After1x1, After3x3 };
enum class EmbeddingStrategy { Positional, MainAndRefs };

// Spatial context module. Three bias-free 1x1 convolutions:
//   w1 [1,C] scores positions, w2 [Ce,C] embeds them, w3 [C,Ce] lifts the
//   softmax-weighted context back to C channels, which is broadcast-added to
//   every position. Ce = C / reduction.
struct ScmWeights {
  Tensor w1, w2, w3;

  static ScmWeights build(size_t channels, size_t reduction, Rng& rng);
  std::vector<std::pair<std::string, Tensor>> named_params(const std::string& prefix) const;
};

// Temporal context module weights, one bank per temporal offset in
// [-max_offset, +max_offset]. Offsets outside the trained range reuse the
// nearest trained bank, which is how a model trained at T frames runs at a
// larger test-time window.
struct TcmWeights {
  int max_offset = 0;
  std::vector<Tensor> w4;  // [1,C] per offset
  std::vector<Tensor> w5;  // [C,C]
  std::vector<Tensor> w6;  // [C,C]

  static TcmWeights build(size_t channels, size_t t_train, Rng& rng);

  const Tensor& w4_at(int offset) const { return w4[clamp_idx(offset)]; }
  const Tensor& w5_at(int offset) const { return w5[clamp_idx(offset)]; }
  const Tensor& w6_at(int offset) const { return w6[clamp_idx(offset)]; }

  std::vector<std::pair<std::string, Tensor>> named_params(const std::string& prefix) const;

 private:
  size_t clamp_idx(int offset) const;
};

// z = x + broadcast(w3 * sum_j softmax(w1 x)_j * (w2 x)_j)
Tensor scm_forward(const Tensor& x, const ScmWeights& w);

// Per-position softmax across the frame axis of [T,H,W] embeddings.
Tensor temporal_softmax(const Tensor& embed);

// x_hat[t,i] = (1/(H*W)) * c[t,i] * sum_j c[t,j], elementwise on [T,H,W].
Tensor temporal_attention_map(const Tensor& tsoft);

// Full temporal blend for the frame at main_idx. Under MainAndRefs the
// reference frames enter through stop_gradient. Offsets are taken relative
// to main_idx.
Tensor tcm_forward(const std::vector<Tensor>& frames, size_t main_idx, const TcmWeights& w,
                   EmbeddingStrategy embedding);

// The attention maps the TCM would use (values only, no grad); one [H,W]
// tensor per frame of the window. Used by the visualizer.
std::vector<Tensor> tcm_attention_maps(const std::vector<Tensor>& frames, size_t main_idx,
                                       const TcmWeights& w);

// Applies the configured module order at the insertion site and returns the
// blended main-frame feature.
Tensor blend_apply(const std::vector<Tensor>& frames, size_t main_idx, BlendOrder order,
                   const ScmWeights* scm, const TcmWeights* tcm, EmbeddingStrategy embedding);

const char* to_string(BlendOrder o);
const char* to_string(InsertionPoint p);
const char* to_string(EmbeddingStrategy e);

}  // namespace blendnet
