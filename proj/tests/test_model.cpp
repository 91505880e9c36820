#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include <doctest.h>

#include "blendnet/model.hpp"
#include "blendnet/ops.hpp"
#include "blendnet/rng.hpp"

using namespace blendnet;

namespace {

ModelConfig tiny_config(BlendOrder order = BlendOrder::TcmThenScm) {
  ModelConfig cfg;
  cfg.stage_widths = {4, 8, 8, 16, 16};
  cfg.pyramid_width = 8;
  cfg.head_width = 8;
  cfg.blend.order = order;
  cfg.blend.t_train = 3;
  cfg.blend.reduction = 4;
  cfg.anchor_spec = AnchorSpec{}.scaled_to(64.0);
  return cfg;
}

Tensor random_frame(Rng& rng, size_t h = 64, size_t w = 64) {
  std::vector<double> v(h * w);
  for (double& x : v) x = rng.uniform(0.0, 1.0);
  return Tensor::from_data({1, h, w}, std::move(v));
}

}  // namespace

TEST_CASE("pyramid of a 128x128 input has grids 16 8 4 2 1") {
  Model m(tiny_config(), 7);
  Rng rng(1);
  Tensor frame = random_frame(rng, 128, 128);
  Pyramid p = m.forward_single(frame);
  REQUIRE(p.levels.size() == 5);
  auto gs = p.grid_sizes();
  CHECK(gs[0] == std::array<size_t, 2>{16, 16});
  CHECK(gs[1] == std::array<size_t, 2>{8, 8});
  CHECK(gs[2] == std::array<size_t, 2>{4, 4});
  CHECK(gs[3] == std::array<size_t, 2>{2, 2});
  CHECK(gs[4] == std::array<size_t, 2>{1, 1});
  for (const Tensor& lv : p.levels) CHECK(lv.dim(0) == 8);
}

TEST_CASE("head outputs have anchor-major channel counts") {
  Model m(tiny_config(), 7);
  Rng rng(2);
  Pyramid p = m.forward_single(random_frame(rng));
  HeadOutputs h = m.head_forward(p);
  REQUIRE(h.cls.size() == p.levels.size());
  for (size_t l = 0; l < h.cls.size(); ++l) {
    CHECK(h.cls[l].dim(0) == 9 * m.config().num_classes);
    CHECK(h.box[l].dim(0) == 9 * 4);
    CHECK(h.cls[l].dim(1) == p.levels[l].dim(1));
    CHECK(h.box[l].dim(2) == p.levels[l].dim(2));
  }
}

TEST_CASE("fresh model predicts the foreground prior everywhere") {
  Model m(tiny_config(), 7);
  Rng rng(3);
  Pyramid p = m.forward_single(random_frame(rng));
  HeadOutputs h = m.head_forward(p);
  // cls_pred bias is ln(p/(1-p)) with p = 0.01 and zero-initialised weights
  // feed it nothing, so every logit sigmoids to about the prior.
  double mean_prob = 0.0;
  size_t n = 0;
  for (const Tensor& t : h.cls)
    for (double z : t.values()) {
      double prob = 1.0 / (1.0 + std::exp(-z));
      CHECK(prob > 0.003);
      CHECK(prob < 0.033);
      mean_prob += prob;
      ++n;
    }
  mean_prob /= static_cast<double>(n);
  CHECK(mean_prob == doctest::Approx(0.01).epsilon(0.3));
}

TEST_CASE("fresh model box deltas are near zero so boxes decode to anchors") {
  Model m(tiny_config(), 7);
  Rng rng(4);
  Pyramid p = m.forward_single(random_frame(rng));
  HeadOutputs h = m.head_forward(p);
  for (const Tensor& t : h.box)
    for (double v : t.values()) CHECK(std::fabs(v) < 0.5);
}

TEST_CASE("named params are unique, complete, and stable across instances") {
  Model a(tiny_config(), 7);
  Model b(tiny_config(), 7);
  auto pa = a.named_params();
  auto pb = b.named_params();
  REQUIRE(pa.size() == pb.size());
  std::set<std::string> names;
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    REQUIRE(pa[i].second.shape() == pb[i].second.shape());
    CHECK(std::memcmp(pa[i].second.data(), pb[i].second.data(),
                      pa[i].second.numel() * sizeof(double)) == 0);  // same seed, same init
    names.insert(pa[i].first);
  }
  CHECK(names.size() == pa.size());
  CHECK(a.trainable().size() == pa.size());

  bool has_scm = false, has_tcm = false;
  for (const auto& [k, v] : pa) {
    if (k.rfind("scm.", 0) == 0) has_scm = true;
    if (k.rfind("tcm.", 0) == 0) has_tcm = true;
  }
  CHECK(has_scm);
  CHECK(has_tcm);
}

TEST_CASE("blend None omits scm and tcm parameters") {
  Model m(tiny_config(BlendOrder::None), 7);
  CHECK_FALSE(m.has_scm());
  CHECK_FALSE(m.has_tcm());
  for (const auto& [k, v] : m.named_params()) {
    CHECK(k.rfind("scm.", 0) != 0);
    CHECK(k.rfind("tcm.", 0) != 0);
  }
}

TEST_CASE("different seeds give different weights") {
  Model a(tiny_config(), 7);
  Model b(tiny_config(), 8);
  auto pa = a.named_params();
  auto pb = b.named_params();
  bool any_diff = false;
  for (size_t i = 0; i < pa.size() && !any_diff; ++i)
    any_diff = std::memcmp(pa[i].second.data(), pb[i].second.data(),
                           pa[i].second.numel() * sizeof(double)) != 0;
  CHECK(any_diff);
}

TEST_CASE("snippet forward with blend None matches the single-frame forward") {
  Model m(tiny_config(BlendOrder::None), 7);
  Rng rng(5);
  std::vector<Tensor> frames{random_frame(rng), random_frame(rng), random_frame(rng)};
  Pyramid ps = m.forward_snippet(frames, 1);
  Pyramid p1 = m.forward_single(frames[1]);
  REQUIRE(ps.levels.size() == p1.levels.size());
  for (size_t l = 0; l < ps.levels.size(); ++l)
    CHECK(std::memcmp(ps.levels[l].data(), p1.levels[l].data(),
                      ps.levels[l].numel() * sizeof(double)) == 0);
}

TEST_CASE("snippet forward is bit-deterministic") {
  Model m(tiny_config(), 7);
  Rng rng(6);
  std::vector<Tensor> frames{random_frame(rng), random_frame(rng), random_frame(rng)};
  Pyramid a = m.forward_snippet(frames, 1);
  Pyramid b = m.forward_snippet(frames, 1);
  for (size_t l = 0; l < a.levels.size(); ++l)
    CHECK(std::memcmp(a.levels[l].data(), b.levels[l].data(),
                      a.levels[l].numel() * sizeof(double)) == 0);
}

TEST_CASE("pyramid_from_sites agrees with forward_snippet") {
  Model m(tiny_config(), 7);
  Rng rng(7);
  std::vector<Tensor> frames{random_frame(rng), random_frame(rng), random_frame(rng)};
  std::vector<Model::SiteFeatures> sites;
  for (const Tensor& f : frames) sites.push_back(m.backbone_to_site(f));
  Pyramid a = m.pyramid_from_sites(sites, 1);
  Pyramid b = m.forward_snippet(frames, 1);
  for (size_t l = 0; l < a.levels.size(); ++l)
    CHECK(std::memcmp(a.levels[l].data(), b.levels[l].data(),
                      a.levels[l].numel() * sizeof(double)) == 0);
}

TEST_CASE("loss on an empty frame is pure background classification") {
  Model m(tiny_config(), 7);
  Rng rng(8);
  Pyramid p = m.forward_single(random_frame(rng));
  LossParts parts;
  Tensor l = m.loss(p, {}, &parts);
  CHECK(parts.num_fg == 0);
  CHECK(parts.box == 0.0);
  CHECK(parts.cls > 0.0);
  CHECK(l.item() == doctest::Approx(parts.total).epsilon(1e-15));
  CHECK(parts.total == doctest::Approx(parts.cls + parts.box).epsilon(1e-12));
}

TEST_CASE("loss with a ground-truth box has foreground anchors and box loss") {
  Model m(tiny_config(), 7);
  Rng rng(9);
  Pyramid p = m.forward_single(random_frame(rng));
  std::vector<GtBox> gts{{{16, 16, 36, 40}, 0, 1.0}};
  LossParts parts;
  Tensor l = m.loss(p, gts, &parts);
  CHECK(parts.num_fg >= 1);
  CHECK(parts.box > 0.0);
  CHECK(std::isfinite(l.item()));
}

TEST_CASE("loss gradient reaches every trainable parameter of the blend path") {
  Model m(tiny_config(), 7);
  Rng rng(10);
  std::vector<Tensor> frames{random_frame(rng), random_frame(rng), random_frame(rng)};
  std::vector<GtBox> gts{{{16, 16, 40, 40}, 0, 1.0}};
  Tape tape;
  {
    Tape::Scope scope(tape);
    Pyramid p = m.forward_snippet(frames, 1);
    Tensor l = m.loss(p, gts);
    tape.backward(l);
  }
  size_t nonzero = 0, total = 0;
  for (const auto& [name, t] : m.named_params()) {
    ++total;
    double s = 0.0;
    for (double g : t.grad()) s += std::fabs(g);
    if (s > 0.0) ++nonzero;
  }
  // Everything except the unused-offset tcm banks sees gradient.
  CHECK(nonzero > total * 3 / 4);
}

TEST_CASE("detect returns boxes inside the image with sane scores") {
  Model m(tiny_config(), 7);
  Rng rng(11);
  Pyramid p = m.forward_single(random_frame(rng));
  auto dets = m.detect(p, 64, 64);
  CHECK(dets.size() <= m.config().max_dets_per_frame);
  for (const auto& d : dets) {
    CHECK(d.score >= m.config().score_floor);
    CHECK(d.score <= 1.0);
    CHECK(d.box.x0 >= 0.0);
    CHECK(d.box.y0 >= 0.0);
    CHECK(d.box.x1 <= 64.0);
    CHECK(d.box.y1 <= 64.0);
    CHECK(d.box.valid());
  }
}

TEST_CASE("attention maps come back for every snippet frame") {
  Model m(tiny_config(), 7);
  Rng rng(12);
  std::vector<Tensor> frames{random_frame(rng), random_frame(rng), random_frame(rng)};
  auto maps = m.attention_maps(frames, 1);
  REQUIRE(maps.size() == 3);
  for (const Tensor& t : maps) {
    CHECK(t.ndim() == 2);
    CHECK(t.numel() > 0);
  }
}

TEST_CASE("attention maps require a tcm in the model") {
  Model m(tiny_config(BlendOrder::ScmOnly), 7);
  Rng rng(13);
  std::vector<Tensor> frames{random_frame(rng), random_frame(rng), random_frame(rng)};
  CHECK_THROWS_AS(m.attention_maps(frames, 1), Error);
}

TEST_CASE("conv layer gain matches 1 over init_std times sqrt fan_in") {
  Rng rng(14);
  ConvLayer l = ConvLayer::conv3(8, 4, 1, true, false, rng);
  const double fan_in = 8 * 9;
  CHECK(l.gain == doctest::Approx(1.0 / (0.01 * std::sqrt(fan_in))).epsilon(1e-12));
  ConvLayer p = ConvLayer::conv1(8, 4, false, true, rng);
  CHECK(p.gain == 1.0);
  CHECK(p.b.defined());
}
