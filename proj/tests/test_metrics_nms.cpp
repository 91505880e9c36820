#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "blendnet/metrics.hpp"
#include "blendnet/nms.hpp"
#include "blendnet/rng.hpp"

using namespace blendnet;

namespace {

Detection det(double x0, double y0, double x1, double y1, double score, int cls = 0) {
  Detection d;
  d.box = {x0, y0, x1, y1};
  d.score = score;
  d.cls = cls;
  return d;
}

// Threshold-sweep AP oracle: for every distinct score threshold (descending),
// recompute precision and recall from scratch over the kept detections, then
// accumulate (r_k - r_{k-1}) * p_env_k against the running precision envelope
// of the full cumulative curve. Mirrors the documented contract term by term
// while sharing no code with the implementation.
double ap_oracle(std::vector<EvalDet> dets, const std::vector<EvalGt>& gts, double iou_thresh) {
  if (gts.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (dets.empty()) return 0.0;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const EvalDet& a, const EvalDet& b) { return a.score > b.score; });
  const size_t N = dets.size();
  std::vector<char> gt_used(gts.size(), 0);
  std::vector<char> tp(N, 0);
  for (size_t i = 0; i < N; ++i) {
    double best = -1.0;
    size_t best_g = gts.size();
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g] || gts[g].frame != dets[i].frame) continue;
      double v = iou(dets[i].box, gts[g].box);
      if (v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g < gts.size() && best >= iou_thresh) {
      gt_used[best_g] = 1;
      tp[i] = 1;
    }
  }
  std::vector<double> prec(N), rec(N);
  size_t tp_cum = 0;
  for (size_t i = 0; i < N; ++i) {
    tp_cum += tp[i];
    prec[i] = static_cast<double>(tp_cum) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(tp_cum) / static_cast<double>(gts.size());
  }
  double ap = 0.0, prev_r = 0.0;
  for (size_t i = 0; i < N; ++i) {
    double env = prec[i];
    for (size_t j = i + 1; j < N; ++j) env = std::max(env, prec[j]);
    ap += (rec[i] - prev_r) * env;
    prev_r = rec[i];
  }
  return ap;
}

}  // namespace

TEST_CASE("nms keeps one of two heavily overlapping boxes") {
  std::vector<Detection> in{det(0, 0, 10, 10, 0.9), det(1, 0, 11, 10, 0.8)};
  auto out = nms(in, 0.5);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.9);
}

TEST_CASE("nms keeps disjoint boxes regardless of score") {
  std::vector<Detection> in{det(0, 0, 10, 10, 0.2), det(50, 50, 60, 60, 0.9)};
  auto out = nms(in, 0.5);
  REQUIRE(out.size() == 2);
  CHECK(out[0].score == 0.9);  // output sorted by descending score
  CHECK(out[1].score == 0.2);
}

TEST_CASE("nms chain: B suppressed by A, C survives because B is gone") {
  // A and B overlap above the threshold, B and C overlap above it, A and C do
  // not: the survivor set is {A, C}.
  std::vector<Detection> in{
      det(0, 0, 10, 10, 0.9),    // A
      det(0, 6, 10, 16, 0.8),    // B: IoU with A = 4/16 = 0.25
      det(0, 12, 10, 22, 0.7),   // C: IoU with B = 0.25, with A = 0
  };
  auto out = nms(in, 0.2);
  REQUIRE(out.size() == 2);
  CHECK(out[0].box.y0 == 0.0);
  CHECK(out[1].box.y0 == 12.0);
}

TEST_CASE("nms is idempotent") {
  std::vector<Detection> in;
  Rng rng(55);
  for (int i = 0; i < 30; ++i) {
    double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
    in.push_back(det(x, y, x + rng.uniform(5, 20), y + rng.uniform(5, 20), rng.uniform(0, 1)));
  }
  auto once = nms(in, 0.5);
  auto twice = nms(once, 0.5);
  REQUIRE(once.size() == twice.size());
  for (size_t i = 0; i < once.size(); ++i) {
    CHECK(once[i].score == twice[i].score);
    CHECK(once[i].box.x0 == twice[i].box.x0);
  }
}

TEST_CASE("nms at exactly the threshold keeps both") {
  // IoU exactly 0.5; suppression requires strictly greater.
  std::vector<Detection> in{det(0, 0, 10, 10, 0.9), det(0, 0, 10, 5, 0.8)};
  CHECK(iou(in[0].box, in[1].box) == doctest::Approx(0.5).epsilon(1e-15));
  auto out = nms(in, 0.5);
  CHECK(out.size() == 2);
}

TEST_CASE("nms breaks score ties by input index") {
  std::vector<Detection> in{det(0, 0, 10, 10, 0.5, 1), det(0, 0, 10, 10, 0.5, 2)};
  auto out = nms(in, 0.3);
  REQUIRE(out.size() == 1);
  CHECK(out[0].cls == 1);
}

TEST_CASE("ap is one for a perfect single detection") {
  std::vector<EvalDet> dets{{0, {0, 0, 10, 10}, 0.9}};
  std::vector<EvalGt> gts{{0, {0, 0, 10, 10}, 1.0}};
  PrCurve c = average_precision(dets, gts);
  CHECK(c.ap == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.num_gt == 1);
  CHECK(c.num_det == 1);
}

TEST_CASE("ap is zero when no detection matches") {
  std::vector<EvalDet> dets{{0, {50, 50, 60, 60}, 0.9}};
  std::vector<EvalGt> gts{{0, {0, 0, 10, 10}, 1.0}};
  CHECK(average_precision(dets, gts).ap == 0.0);
}

TEST_CASE("ap with no ground truth is NaN and excluded from the mean") {
  PrCurve c = average_precision({{0, {0, 0, 5, 5}, 0.5}}, {});
  CHECK(std::isnan(c.ap));
  double m = mean_ap({1.0, std::numeric_limits<double>::quiet_NaN(), 0.5});
  CHECK(m == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(std::isnan(mean_ap({std::numeric_limits<double>::quiet_NaN()})));
}

TEST_CASE("ap with no detections but ground truth present is zero") {
  std::vector<EvalGt> gts{{0, {0, 0, 10, 10}, 1.0}};
  PrCurve c = average_precision({}, gts);
  CHECK(c.ap == 0.0);
  CHECK(c.num_gt == 1);
}

TEST_CASE("ap frozen 0.8333 case: TP FP TP over two gts") {
  // Cumulative curve: p = 1, 1/2, 2/3 at r = 1/2, 1/2, 1.
  // Envelope: max suffix precision = 1, 2/3, 2/3.
  // ap = 1/2 * 1 + 0 + 1/2 * 2/3 = 5/6.
  std::vector<EvalGt> gts{{0, {0, 0, 10, 10}, 1.0}, {0, {100, 100, 110, 110}, 1.0}};
  std::vector<EvalDet> dets{
      {0, {0, 0, 10, 10}, 0.9},        // TP on gt 0
      {0, {200, 200, 210, 210}, 0.8},  // FP
      {0, {100, 100, 110, 110}, 0.7},  // TP on gt 1
  };
  PrCurve c = average_precision(dets, gts);
  CHECK(c.ap == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(std::fabs(c.ap - 0.8333) < 1e-4);
}

TEST_CASE("ap matches the threshold-sweep oracle on every outcome sequence") {
  // Exhaustive: every {FP, TP@gt0, TP@gt1} sequence of up to 4 detections,
  // realised geometrically, compared exactly against the oracle.
  std::vector<EvalGt> gts{{0, {0, 0, 10, 10}, 1.0}, {0, {100, 100, 110, 110}, 1.0}};
  const BBox hit0{0, 0, 10, 10}, hit1{100, 100, 110, 110}, miss{200, 200, 210, 210};
  for (size_t len = 1; len <= 4; ++len) {
    std::vector<size_t> seq(len, 0);
    while (true) {
      std::vector<EvalDet> dets;
      for (size_t i = 0; i < len; ++i) {
        const BBox& b = seq[i] == 0 ? miss : (seq[i] == 1 ? hit0 : hit1);
        dets.push_back({0, b, 1.0 - 0.01 * static_cast<double>(i)});
      }
      PrCurve c = average_precision(dets, gts);
      double want = ap_oracle(dets, gts, 0.5);
      CHECK(c.ap == doctest::Approx(want).epsilon(1e-14));

      size_t p = 0;
      while (p < len && seq[p] == 2) seq[p++] = 0;
      if (p == len) break;
      ++seq[p];
    }
  }
}

TEST_CASE("ap never pairs detections and gts across frames") {
  std::vector<EvalGt> gts{{1, {0, 0, 10, 10}, 1.0}};
  std::vector<EvalDet> dets{{2, {0, 0, 10, 10}, 0.9}};  // same box, other frame
  CHECK(average_precision(dets, gts).ap == 0.0);
}

TEST_CASE("each gt matches at most one detection") {
  std::vector<EvalGt> gts{{0, {0, 0, 10, 10}, 1.0}};
  std::vector<EvalDet> dets{{0, {0, 0, 10, 10}, 0.9}, {0, {0, 0, 10, 10}, 0.8}};
  PrCurve c = average_precision(dets, gts);
  // First is TP, duplicate is FP: ap stays 1 (envelope), precision drops.
  CHECK(c.ap == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[1].precision == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pr points are monotone in recall and descending in score") {
  Rng rng(56);
  std::vector<EvalGt> gts;
  std::vector<EvalDet> dets;
  for (int i = 0; i < 12; ++i) {
    double x = rng.uniform(0, 300);
    gts.push_back({i % 3, {x, 0, x + 10, 10}, 1.0});
    if (i % 2 == 0) dets.push_back({i % 3, {x + rng.uniform(0, 4), 0, x + 10, 10}, rng.uniform(0, 1)});
    dets.push_back({i % 3, {rng.uniform(400, 500), 0, rng.uniform(510, 520), 10}, rng.uniform(0, 1)});
  }
  PrCurve c = average_precision(dets, gts);
  for (size_t i = 1; i < c.points.size(); ++i) {
    CHECK(c.points[i].recall >= c.points[i - 1].recall);
    CHECK(c.points[i].score <= c.points[i - 1].score);
  }
  CHECK(c.ap == doctest::Approx(ap_oracle(dets, gts, 0.5)).epsilon(1e-14));
}

TEST_CASE("stratified recall bins by visibility and flags empty bins") {
  std::vector<EvalGt> gts{
      {0, {0, 0, 10, 10}, 0.1},     // low visibility, will be found
      {0, {50, 0, 60, 10}, 0.5},    // mid, missed
      {0, {100, 0, 110, 10}, 1.0},  // high, found
  };
  std::vector<EvalDet> dets{
      {0, {0, 0, 10, 10}, 0.9},
      {0, {100, 0, 110, 10}, 0.8},
      {0, {50, 0, 60, 10}, 0.2},  // below score threshold
  };
  auto bins = stratified_recall(dets, gts, 0.5, 0.5);
  REQUIRE(bins.size() == 3);
  CHECK(bins[0].recall() == doctest::Approx(1.0));
  CHECK(bins[1].recall() == doctest::Approx(0.0));
  CHECK(bins[2].recall() == doctest::Approx(1.0));

  auto empty = stratified_recall({}, {}, 0.5, 0.5);
  for (const auto& b : empty) {
    CHECK_FALSE(b.populated());
    CHECK(std::isnan(b.recall()));
  }
}

TEST_CASE("visibility exactly one lands in the top bin") {
  std::vector<EvalGt> gts{{0, {0, 0, 10, 10}, 1.0}};
  auto bins = stratified_recall({}, gts, 0.5, 0.5);
  CHECK(bins[2].total == 1);
  CHECK(bins[0].total + bins[1].total == 0);
}
