#include <cmath>
#include <cstring>
#include <vector>

#include <doctest.h>

#include "blendnet/blend.hpp"
#include "blendnet/ops.hpp"
#include "blendnet/ref_ops.hpp"
#include "blendnet/rng.hpp"
#include "blendnet/tensor.hpp"

using namespace blendnet;

namespace {

Tensor random_tensor(std::vector<size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(v));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scm on all-zero input returns all zeros") {
  Rng rng(31);
  ScmWeights w = ScmWeights::build(8, 4, rng);
  Tensor x = Tensor::zeros({8, 3, 3});
  Tensor z = scm_forward(x, w);
  for (double v : z.values()) CHECK(v == 0.0);
}

TEST_CASE("scm with zero w3 is the identity") {
  Rng rng(32);
  ScmWeights w = ScmWeights::build(8, 4, rng);
  for (double& v : w.w3.values()) v = 0.0;
  Tensor x = random_tensor({8, 4, 5}, rng);
  Tensor z = scm_forward(x, w);
  CHECK(bit_equal(z, x));
}

TEST_CASE("scm residual term is position independent") {
  Rng rng(33);
  ScmWeights w = ScmWeights::build(8, 4, rng);
  Tensor x = random_tensor({8, 4, 4}, rng);
  Tensor z = scm_forward(x, w);
  // z - x is the broadcast context vector: constant across positions.
  for (size_t c = 0; c < 8; ++c) {
    double first = z.at({c, 0, 0}) - x.at({c, 0, 0});
    for (size_t i = 0; i < 4; ++i)
      for (size_t j = 0; j < 4; ++j)
        CHECK(std::fabs((z.at({c, i, j}) - x.at({c, i, j})) - first) < 1e-12);
  }
}

TEST_CASE("scm matches the equation-level reference on a 1x4x3x3 case") {
  Rng rng(34);
  const size_t C = 4, Ce = 1, H = 3, W = 3;
  ScmWeights w = ScmWeights::build(C, 4, rng);
  Tensor x = random_tensor({C, H, W}, rng);
  Tensor z = scm_forward(x, w);
  std::vector<double> want =
      ref::scm(x.values(), C, H, W, w.w1.values(), w.w2.values(), Ce, w.w3.values());
  REQUIRE(z.numel() == want.size());
  for (size_t i = 0; i < want.size(); ++i) CHECK(std::fabs(z.values()[i] - want[i]) < 1e-10);
}

TEST_CASE("scm matches the reference on a larger case") {
  Rng rng(35);
  const size_t C = 16, Ce = 4, H = 6, W = 5;
  ScmWeights w = ScmWeights::build(C, 4, rng);
  Tensor x = random_tensor({C, H, W}, rng);
  Tensor z = scm_forward(x, w);
  std::vector<double> want =
      ref::scm(x.values(), C, H, W, w.w1.values(), w.w2.values(), Ce, w.w3.values());
  for (size_t i = 0; i < want.size(); ++i) CHECK(std::fabs(z.values()[i] - want[i]) < 1e-10);
}

TEST_CASE("scm build rejects channels not divisible by the reduction") {
  Rng rng(36);
  CHECK_THROWS_AS(ScmWeights::build(6, 4, rng), Error);
}

TEST_CASE("temporal softmax frozen cases") {
  SUBCASE("equal embeddings give 1/T") {
    Tensor e = Tensor::full({4, 2, 2}, 0.37);
    Tensor c = temporal_softmax(e);
    for (double v : c.values()) CHECK(std::fabs(v - 0.25) < 1e-15);
  }
  SUBCASE("T = 1 gives exactly one") {
    Rng rng(37);
    Tensor e = random_tensor({1, 3, 3}, rng);
    Tensor c = temporal_softmax(e);
    for (double v : c.values()) CHECK(v == 1.0);
  }
  SUBCASE("[0, ln 3] gives [0.25, 0.75]") {
    Tensor e = Tensor::from_data({2, 1, 1}, {0.0, std::log(3.0)});
    Tensor c = temporal_softmax(e);
    CHECK(std::fabs(c.values()[0] - 0.25) < 1e-15);
    CHECK(std::fabs(c.values()[1] - 0.75) < 1e-15);
  }
}

TEST_CASE("temporal softmax normalizes each position over frames") {
  Rng rng(38);
  Tensor e = random_tensor({5, 4, 3}, rng, -50.0, 50.0);
  Tensor c = temporal_softmax(e);
  for (size_t i = 0; i < 12; ++i) {
    double s = 0.0;
    for (size_t t = 0; t < 5; ++t) s += c.values()[t * 12 + i];
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
  std::vector<double> want = ref::temporal_softmax(e.values(), 5, 12);
  for (size_t i = 0; i < want.size(); ++i) CHECK(std::fabs(c.values()[i] - want[i]) < 1e-12);
}

TEST_CASE("attention map frozen cases") {
  SUBCASE("T = 1 window is all ones") {
    Tensor c = Tensor::full({1, 2, 2}, 1.0);
    Tensor m = temporal_attention_map(c);
    for (double v : m.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("uniform weights give 1/T^2") {
    const size_t T = 4;
    Tensor c = Tensor::full({T, 3, 3}, 1.0 / T);
    Tensor m = temporal_attention_map(c);
    for (double v : m.values()) CHECK(std::fabs(v - 1.0 / (T * T)) < 1e-15);
  }
  SUBCASE("matches the reference") {
    Rng rng(39);
    Tensor e = random_tensor({3, 4, 4}, rng);
    Tensor c = temporal_softmax(e);
    Tensor m = temporal_attention_map(c);
    std::vector<double> want = ref::attention_map(c.values(), 3, 16);
    for (size_t i = 0; i < want.size(); ++i) CHECK(std::fabs(m.values()[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("tcm with zero w5 and w6 returns the main frame unchanged") {
  Rng rng(40);
  const size_t C = 8;
  TcmWeights w = TcmWeights::build(C, 3, rng);
  for (Tensor& t : w.w5)
    for (double& v : t.values()) v = 0.0;
  for (Tensor& t : w.w6)
    for (double& v : t.values()) v = 0.0;
  std::vector<Tensor> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(random_tensor({C, 4, 4}, rng));
  Tensor z = tcm_forward(frames, 1, w, EmbeddingStrategy::Positional);
  CHECK(bit_equal(z, frames[1]));
}

TEST_CASE("tcm matches the equation-level reference") {
  Rng rng(41);
  const size_t C = 8, T = 3, H = 4, W = 3, HW = H * W;
  TcmWeights w = TcmWeights::build(C, T, rng);
  std::vector<Tensor> frames;
  std::vector<double> flat;
  for (size_t i = 0; i < T; ++i) {
    frames.push_back(random_tensor({C, H, W}, rng));
    flat.insert(flat.end(), frames.back().values().begin(), frames.back().values().end());
  }
  const size_t main_idx = 1;
  std::vector<std::vector<double>> w4, w5, w6;
  for (size_t m = 0; m < T; ++m) {
    int off = static_cast<int>(m) - static_cast<int>(main_idx);
    w4.push_back(w.w4_at(off).values());
    w5.push_back(w.w5_at(off).values());
    w6.push_back(w.w6_at(off).values());
  }
  Tensor z = tcm_forward(frames, main_idx, w, EmbeddingStrategy::Positional);
  std::vector<double> want = ref::tcm(flat, T, C, HW, main_idx, w4, w5, w6);
  REQUIRE(z.numel() == want.size());
  for (size_t i = 0; i < want.size(); ++i) CHECK(std::fabs(z.values()[i] - want[i]) < 1e-10);
}

TEST_CASE("tcm offset banks clamp beyond the trained range") {
  Rng rng(42);
  TcmWeights w = TcmWeights::build(4, 3, rng);  // trained offsets -1..+1
  CHECK(bit_equal(w.w4_at(-3), w.w4_at(-1)));
  CHECK(bit_equal(w.w4_at(5), w.w4_at(1)));
  CHECK(bit_equal(w.w5_at(2), w.w5_at(1)));
  CHECK(bit_equal(w.w6_at(-2), w.w6_at(-1)));
  CHECK_FALSE(bit_equal(w.w4_at(-1), w.w4_at(1)));
}

TEST_CASE("tcm attention maps are one per frame and flow to the forward") {
  Rng rng(43);
  const size_t C = 8, T = 3;
  TcmWeights w = TcmWeights::build(C, T, rng);
  std::vector<Tensor> frames;
  for (size_t i = 0; i < T; ++i) frames.push_back(random_tensor({C, 5, 4}, rng));
  std::vector<Tensor> maps = tcm_attention_maps(frames, 1, w);
  REQUIRE(maps.size() == T);
  for (const Tensor& m : maps) {
    REQUIRE(m.shape() == std::vector<size_t>{5, 4});
  }
  // Uniform embeddings: every map entry is 1/T^2 regardless of the frame data.
  for (Tensor& t : w.w4)
    for (double& v : t.values()) v = 0.0;
  maps = tcm_attention_maps(frames, 1, w);
  for (const Tensor& m : maps)
    for (double v : m.values()) CHECK(std::fabs(v - 1.0 / (T * T)) < 1e-12);
}

TEST_CASE("blend_apply dispatch table") {
  Rng rng(44);
  const size_t C = 8;
  ScmWeights scm = ScmWeights::build(C, 4, rng);
  TcmWeights tcm = TcmWeights::build(C, 3, rng);
  std::vector<Tensor> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(random_tensor({C, 4, 4}, rng));
  const size_t mi = 1;

  SUBCASE("None returns the main frame") {
    Tensor z = blend_apply(frames, mi, BlendOrder::None, nullptr, nullptr,
                           EmbeddingStrategy::Positional);
    CHECK(bit_equal(z, frames[mi]));
  }
  SUBCASE("ScmOnly with zero w3 returns the main frame") {
    ScmWeights w0 = ScmWeights::build(C, 4, rng);
    for (double& v : w0.w3.values()) v = 0.0;
    Tensor z =
        blend_apply(frames, mi, BlendOrder::ScmOnly, &w0, nullptr, EmbeddingStrategy::Positional);
    CHECK(bit_equal(z, frames[mi]));
  }
  SUBCASE("ScmOnly equals scm_forward on the main frame") {
    Tensor z =
        blend_apply(frames, mi, BlendOrder::ScmOnly, &scm, nullptr, EmbeddingStrategy::Positional);
    CHECK(bit_equal(z, scm_forward(frames[mi], scm)));
  }
  SUBCASE("TcmOnly equals tcm_forward") {
    Tensor z = blend_apply(frames, mi, BlendOrder::TcmOnly, nullptr, &tcm,
                           EmbeddingStrategy::Positional);
    CHECK(bit_equal(z, tcm_forward(frames, mi, tcm, EmbeddingStrategy::Positional)));
  }
  SUBCASE("TcmThenScm composes in order") {
    Tensor z = blend_apply(frames, mi, BlendOrder::TcmThenScm, &scm, &tcm,
                           EmbeddingStrategy::Positional);
    Tensor mid = tcm_forward(frames, mi, tcm, EmbeddingStrategy::Positional);
    CHECK(bit_equal(z, scm_forward(mid, scm)));
  }
  SUBCASE("ScmThenTcm blends the spatially enriched frames") {
    Tensor z = blend_apply(frames, mi, BlendOrder::ScmThenTcm, &scm, &tcm,
                           EmbeddingStrategy::Positional);
    std::vector<Tensor> enriched;
    for (const Tensor& f : frames) enriched.push_back(scm_forward(f, scm));
    CHECK(bit_equal(z, tcm_forward(enriched, mi, tcm, EmbeddingStrategy::Positional)));
  }
}

TEST_CASE("named params use offset-tagged keys") {
  Rng rng(45);
  ScmWeights scm = ScmWeights::build(8, 4, rng);
  auto sp = scm.named_params("scm");
  REQUIRE(sp.size() == 3);
  CHECK(sp[0].first == "scm.w1");
  CHECK(sp[1].first == "scm.w2");
  CHECK(sp[2].first == "scm.w3");

  TcmWeights tcm = TcmWeights::build(8, 3, rng);
  auto tp = tcm.named_params("tcm");
  REQUIRE(tp.size() == 9);  // offsets -1, 0, 1, three banks each
  CHECK(tp[0].first == "tcm.w4.-1");
  CHECK(tp[3].first == "tcm.w4.0");
  CHECK(tp[8].first == "tcm.w6.1");
}

TEST_CASE("gradients flow through scm") {
  Rng rng(46);
  ScmWeights w = ScmWeights::build(8, 4, rng);
  w.w1.set_requires_grad(true);
  w.w2.set_requires_grad(true);
  w.w3.set_requires_grad(true);
  Tensor x = random_tensor({8, 3, 3}, rng);
  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor z = scm_forward(x, w);
    Tensor loss = mean_over(mul(z, z), {0, 1, 2});
    tape.backward(loss);
  }
  double g1 = 0.0, g2 = 0.0, g3 = 0.0;
  for (double g : w.w1.grad()) g1 += std::fabs(g);
  for (double g : w.w2.grad()) g2 += std::fabs(g);
  for (double g : w.w3.grad()) g3 += std::fabs(g);
  CHECK(g1 > 0.0);
  CHECK(g2 > 0.0);
  CHECK(g3 > 0.0);
}

TEST_CASE("main-and-refs embedding blocks gradient into reference frames") {
  Rng rng(47);
  const size_t C = 8;
  TcmWeights w = TcmWeights::build(C, 3, rng);
  std::vector<Tensor> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(random_tensor({C, 3, 3}, rng));
  for (Tensor& f : frames) f.set_requires_grad(true);

  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor z = tcm_forward(frames, 1, w, EmbeddingStrategy::MainAndRefs);
    Tensor loss = mean_over(mul(z, z), {0, 1, 2});
    tape.backward(loss);
  }
  for (double g : frames[0].grad()) CHECK(std::fabs(g) < 1e-9);
  for (double g : frames[2].grad()) CHECK(std::fabs(g) < 1e-9);
  double gmain = 0.0;
  for (double g : frames[1].grad()) gmain += std::fabs(g);
  CHECK(gmain > 1e-6);
}

TEST_CASE("positional embedding lets gradient reach reference frames") {
  Rng rng(48);
  const size_t C = 8;
  TcmWeights w = TcmWeights::build(C, 3, rng);
  std::vector<Tensor> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(random_tensor({C, 3, 3}, rng));
  for (Tensor& f : frames) f.set_requires_grad(true);

  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor z = tcm_forward(frames, 1, w, EmbeddingStrategy::Positional);
    Tensor loss = mean_over(mul(z, z), {0, 1, 2});
    tape.backward(loss);
  }
  double gref = 0.0;
  for (double g : frames[0].grad()) gref += std::fabs(g);
  CHECK(gref > 1e-6);
}

TEST_CASE("to_string round trips the enums") {
  CHECK(std::string(to_string(BlendOrder::None)) == "none");
  CHECK(std::string(to_string(BlendOrder::TcmThenScm)) == "tcm_scm");
  CHECK(std::string(to_string(InsertionPoint::AfterAdd)) == "after_add");
  CHECK(std::string(to_string(EmbeddingStrategy::MainAndRefs)) == "main_refs");
}
