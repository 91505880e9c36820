#include "blendnet/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blendnet/annotations.hpp"
#include "blendnet/common.hpp"
#include "blendnet/threading.hpp"

namespace blendnet {
namespace {

struct ClipResult {
  std::vector<Detection> detections;                 // frame order, image coords
  std::vector<std::vector<EvalDet>> dets_by_class;   // letterboxed-frame keyed
  std::vector<EvalGt> gts;                           // single pooled list (class via parallel array)
  std::vector<int> gt_class;
  size_t num_frames = 0;
};

ClipResult eval_clip(const Model& model, const VideoClip& clip, size_t clip_index,
                     const EvalOptions& opt) {
  size_t num_classes = model.config().num_classes;
  ClipResult out;
  out.dets_by_class.resize(num_classes);
  out.num_frames = clip.num_frames();
  check(clip.num_frames() > 0, "clip " + clip.id + " has no frames");

  LetterboxTransform tf =
      letterbox_plan(clip.height, clip.width, opt.target_short, opt.pad_multiple);

  // Every window re-uses these; the backbone below the blend site never
  // depends on which frame is the center.
  std::vector<Model::SiteFeatures> sites(clip.num_frames());
  for (size_t f = 0; f < clip.num_frames(); ++f) {
    std::vector<double> img =
        letterbox_frame(clip.frames[f], clip.channels, clip.height, clip.width, tf);
    Tensor t = Tensor::from_data({clip.channels, tf.out_h, tf.out_w}, std::move(img));
    sites[f] = model.backbone_to_site(t);
  }

  int tau = static_cast<int>((opt.t_test - 1) / 2);
  int last = static_cast<int>(clip.num_frames()) - 1;
  for (int center = 0; center <= last; ++center) {
    std::vector<Model::SiteFeatures> window(opt.t_test);
    for (int k = -tau; k <= tau; ++k) {
      int idx = center + opt.sample_stride * k;
      idx = idx < 0 ? 0 : (idx > last ? last : idx);
      window[static_cast<size_t>(k + tau)] = sites[static_cast<size_t>(idx)];
    }
    Pyramid pyr = model.pyramid_from_sites(window, static_cast<size_t>(tau));
    std::vector<Detection> dets = model.detect(pyr, tf.content_w, tf.content_h);

    int frame_key = static_cast<int>(clip_index) * 100000 + center;
    for (Detection& d : dets) {
      check(d.cls >= 0 && static_cast<size_t>(d.cls) < num_classes, "detection class out of range");
      out.dets_by_class[static_cast<size_t>(d.cls)].push_back(
          EvalDet{frame_key, d.box, d.score});
      d.clip_id = clip.id;
      d.frame_idx = center;
      d.box = letterbox_invert(d.box, tf);
      out.detections.push_back(d);
    }
    for (const GtBox& g : clip.boxes[static_cast<size_t>(center)]) {
      out.gts.push_back(EvalGt{frame_key, letterbox_box(g.box, tf), g.visibility});
      out.gt_class.push_back(g.cls);
    }
  }
  return out;
}

}  // namespace

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions o;
  o.t_test = cfg.t_test;
  o.sample_stride = cfg.sample_stride;
  o.target_short = cfg.target_short;
  o.pad_multiple = cfg.pad_multiple();
  o.map_iou = cfg.map_iou;
  return o;
}

EvalReport evaluate_clips(const Model& model, const std::vector<VideoClip>& clips,
                          const EvalOptions& opt) {
  check(!clips.empty(), "evaluation split is empty");
  check(opt.t_test % 2 == 1, "t_test must be odd");

  std::vector<ClipResult> per_clip(clips.size());
  parallel_for(clips.size(), [&](size_t i) { per_clip[i] = eval_clip(model, clips[i], i, opt); });

  size_t num_classes = model.config().num_classes;
  std::vector<std::vector<EvalDet>> dets_by_class(num_classes);
  std::vector<std::vector<EvalGt>> gts_by_class(num_classes);
  EvalReport rep;
  for (size_t i = 0; i < per_clip.size(); ++i) {
    ClipResult& c = per_clip[i];
    rep.num_frames += c.num_frames;
    rep.num_dets += c.detections.size();
    for (size_t k = 0; k < num_classes; ++k)
      dets_by_class[k].insert(dets_by_class[k].end(), c.dets_by_class[k].begin(),
                              c.dets_by_class[k].end());
    for (size_t g = 0; g < c.gts.size(); ++g) {
      int cls = c.gt_class[g];
      check(cls >= 0 && static_cast<size_t>(cls) < num_classes,
            "ground-truth class out of range in clip " + clips[i].id);
      gts_by_class[static_cast<size_t>(cls)].push_back(c.gts[g]);
    }
    rep.num_gt += c.gts.size();
    rep.detections.insert(rep.detections.end(), c.detections.begin(), c.detections.end());
  }

  std::vector<double> aps;
  rep.recall_bins.clear();
  for (size_t k = 0; k < num_classes; ++k) {
    rep.curves.push_back(average_precision(dets_by_class[k], gts_by_class[k], opt.map_iou));
    aps.push_back(rep.curves.back().ap);
    std::vector<VisibilityBin> bins =
        stratified_recall(dets_by_class[k], gts_by_class[k], opt.recall_score, opt.map_iou);
    if (rep.recall_bins.empty()) {
      rep.recall_bins = bins;
    } else {
      for (size_t b = 0; b < bins.size(); ++b) {
        rep.recall_bins[b].total += bins[b].total;
        rep.recall_bins[b].matched += bins[b].matched;
      }
    }
  }
  rep.map = mean_ap(aps);
  return rep;
}

std::string format_eval_report(const EvalReport& r, double map_iou, double recall_score) {
  std::stringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "mAP@%.2f = %.4f\n", map_iou, r.map);
  out << buf;
  for (size_t k = 0; k < r.curves.size(); ++k) {
    const PrCurve& c = r.curves[k];
    if (std::isnan(c.ap)) {
      std::snprintf(buf, sizeof buf, "class %zu: AP = n/a (no ground truth)\n", k);
    } else {
      std::snprintf(buf, sizeof buf, "class %zu: AP = %.4f  (gt=%zu det=%zu)\n", k, c.ap,
                    c.num_gt, c.num_det);
    }
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "stratified recall (score >= %.2f, IoU >= %.2f)\n", recall_score,
                map_iou);
  out << buf;
  for (const VisibilityBin& b : r.recall_bins) {
    char close = b.hi >= 1.0 ? ']' : ')';
    if (b.populated()) {
      std::snprintf(buf, sizeof buf, "  vis [%.2f, %.2f%c: recall = %.4f  (n=%zu)\n", b.lo, b.hi,
                    close, b.recall(), b.total);
    } else {
      std::snprintf(buf, sizeof buf, "  vis [%.2f, %.2f%c: recall = n/a (empty bin)\n", b.lo, b.hi,
                    close);
    }
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "frames = %zu, ground-truth boxes = %zu, detections = %zu\n",
                r.num_frames, r.num_gt, r.num_dets);
  out << buf;
  return out.str();
}

void write_eval_outputs(const EvalReport& r, const EvalOptions& opt, const std::string& dir,
                        const std::string& tag) {
  std::filesystem::create_directories(dir);
  save_results(r.detections, dir + "/results_" + tag + ".txt");

  std::ofstream pr(dir + "/pr_" + tag + ".txt", std::ios::binary);
  check(pr.good(), "cannot write PR file in " + dir);
  for (size_t k = 0; k < r.curves.size(); ++k) {
    pr << "# class " << k << " ap ";
    if (std::isnan(r.curves[k].ap))
      pr << "nan";
    else
      pr << r.curves[k].ap;
    pr << "\n";
    char buf[128];
    for (const PrPoint& p : r.curves[k].points) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.score, p.recall, p.precision);
      pr << buf;
    }
  }
  check(pr.good(), "failed writing PR file in " + dir);

  std::ofstream metrics(dir + "/metrics_" + tag + ".txt", std::ios::binary);
  check(metrics.good(), "cannot write metrics file in " + dir);
  metrics << format_eval_report(r, opt.map_iou, opt.recall_score);
  check(metrics.good(), "failed writing metrics file in " + dir);

  std::ofstream csv(dir + "/metrics_" + tag + ".csv", std::ios::binary);
  check(csv.good(), "cannot write metrics CSV in " + dir);
  csv << "metric,key,value\n";
  csv << "map,," << (std::isnan(r.map) ? std::string("nan") : std::to_string(r.map)) << "\n";
  for (size_t k = 0; k < r.curves.size(); ++k) {
    csv << "ap,class" << k << ","
        << (std::isnan(r.curves[k].ap) ? std::string("nan") : std::to_string(r.curves[k].ap))
        << "\n";
  }
  for (const VisibilityBin& b : r.recall_bins) {
    char key[64];
    std::snprintf(key, sizeof key, "vis_%.2f_%.2f", b.lo, b.hi);
    csv << "recall," << key << ","
        << (b.populated() ? std::to_string(b.recall()) : std::string("nan")) << "\n";
  }
  check(csv.good(), "failed writing metrics CSV in " + dir);
}

}  // namespace blendnet
