// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/eval.h"

#include <algorithm>
#include <memory>
#include <numeric>
#include <set>
#include <utility>

namespace pcsc {
namespace {

template <typename T, typename ScoreFn>
std::vector<int> RankOrder(std::span<const T> items, ScoreFn score) {
  std::vector<int> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return score(items[a]) > score(items[b]);
  });
  return order;
}

// std::vector<bool> is not contiguous, so matching results are copied into
// a plain bool buffer before computing AP.
double RankedAp(const std::vector<bool>& tp, int num_gt);

template <typename ApFn>
EvalResult Summarize(double delta, const std::set<int>& det_classes,
                     const std::set<int>& gt_classes, ApFn ap_for) {
  EvalResult r;
  r.delta = delta;
  double sum = 0.0;
  for (int c : gt_classes) {
    const double ap = *ap_for(c);
    r.ap[c] = ap;
    sum += ap;
  }
  r.map = r.ap.empty() ? 0.0 : sum / r.ap.size();
  for (int c : det_classes) {
    if (!gt_classes.count(c)) r.classes_without_gt.push_back(c);
  }
  return r;
}

}  // namespace

std::vector<PrPoint> PrCurve(std::span<const bool> tp_in_rank_order,
                             int num_gt) {
  std::vector<PrPoint> curve;
  curve.reserve(tp_in_rank_order.size());
  int tp = 0;
  for (size_t k = 0; k < tp_in_rank_order.size(); ++k) {
    tp += tp_in_rank_order[k] ? 1 : 0;
    curve.push_back({num_gt > 0 ? static_cast<double>(tp) / num_gt : 0.0,
                     static_cast<double>(tp) / (k + 1)});
  }
  return curve;
}

double AveragePrecision(std::span<const bool> tp_in_rank_order, int num_gt) {
  if (num_gt <= 0) return 0.0;
  const auto curve = PrCurve(tp_in_rank_order, num_gt);
  // Precision envelope, swept from the lowest-ranked detection upwards.
  std::vector<double> envelope(curve.size());
  double best = 0.0;
  for (size_t k = curve.size(); k-- > 0;) {
    best = std::max(best, curve[k].precision);
    envelope[k] = best;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (size_t k = 0; k < curve.size(); ++k) {
    if (curve[k].recall > prev_recall) {
      ap += (curve[k].recall - prev_recall) * envelope[k];
      prev_recall = curve[k].recall;
    }
  }
  return ap;
}

std::optional<double> FrameAp(std::span<const FrameDetection> dets,
                              std::span<const GroundTruthBox> gt, int class_id,
                              double delta) {
  std::map<std::pair<std::string, int>, std::vector<int>> by_frame;
  int num_gt = 0;
  for (int g = 0; g < static_cast<int>(gt.size()); ++g) {
    if (gt[g].gt.class_id != class_id) continue;
    by_frame[{gt[g].video_id, gt[g].frame}].push_back(g);
    ++num_gt;
  }
  if (num_gt == 0) return std::nullopt;

  std::vector<FrameDetection> mine;
  for (const auto& d : dets) {
    if (d.det.class_id == class_id) mine.push_back(d);
  }
  const auto order = RankOrder<FrameDetection>(
      mine, [](const FrameDetection& d) { return d.det.score; });

  std::vector<bool> matched(gt.size(), false);
  std::vector<bool> tp;
  tp.reserve(order.size());
  for (int idx : order) {
    const auto& d = mine[idx];
    int best = -1;
    double best_iou = delta;
    if (auto it = by_frame.find({d.video_id, d.frame}); it != by_frame.end()) {
      for (int g : it->second) {
        if (matched[g]) continue;
        const double v = Iou(d.det.box, gt[g].gt.box);
        if (v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
    }
    if (best >= 0) matched[best] = true;
    tp.push_back(best >= 0);
  }
  return RankedAp(tp, num_gt);
}

EvalResult FrameMap(std::span<const FrameDetection> dets,
                    std::span<const GroundTruthBox> gt, double delta) {
  std::set<int> det_classes;
  std::set<int> gt_classes;
  for (const auto& d : dets) det_classes.insert(d.det.class_id);
  for (const auto& g : gt) gt_classes.insert(g.gt.class_id);
  return Summarize(delta, det_classes, gt_classes, [&](int c) {
    return FrameAp(dets, gt, c, delta);
  });
}

std::optional<double> VideoAp(std::span<const ActionTube> tubes,
                              std::span<const GroundTruthTube> gt,
                              int class_id, double delta) {
  std::map<std::string, std::vector<int>> by_video;
  int num_gt = 0;
  for (int g = 0; g < static_cast<int>(gt.size()); ++g) {
    if (gt[g].class_id != class_id) continue;
    by_video[gt[g].video_id].push_back(g);
    ++num_gt;
  }
  if (num_gt == 0) return std::nullopt;

  std::vector<ActionTube> mine;
  for (const auto& t : tubes) {
    if (t.class_id == class_id && !t.elements.empty()) mine.push_back(t);
  }
  const auto order = RankOrder<ActionTube>(
      mine, [](const ActionTube& t) { return t.score; });

  std::vector<bool> matched(gt.size(), false);
  std::vector<bool> tp;
  for (int idx : order) {
    const auto& t = mine[idx];
    int best = -1;
    double best_iou = delta;
    if (auto it = by_video.find(t.video_id); it != by_video.end()) {
      for (int g : it->second) {
        if (matched[g]) continue;
        const double v = TubeIou(t, gt[g]);
        if (v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
    }
    if (best >= 0) matched[best] = true;
    tp.push_back(best >= 0);
  }
  return RankedAp(tp, num_gt);
}

EvalResult VideoMap(std::span<const ActionTube> tubes,
                    std::span<const GroundTruthTube> gt, double delta) {
  std::set<int> det_classes;
  std::set<int> gt_classes;
  for (const auto& t : tubes) det_classes.insert(t.class_id);
  for (const auto& g : gt) gt_classes.insert(g.class_id);
  return Summarize(delta, det_classes, gt_classes, [&](int c) {
    return VideoAp(tubes, gt, c, delta);
  });
}

std::array<double, 10> CocoThresholds() {
  std::array<double, 10> t{};
  for (int k = 0; k < 10; ++k) t[k] = 0.50 + 0.05 * k;
  return t;
}

double CocoFrameMap(std::span<const FrameDetection> dets,
                    std::span<const GroundTruthBox> gt) {
  double sum = 0.0;
  for (double d : CocoThresholds()) sum += FrameMap(dets, gt, d).map;
  return sum / 10.0;
}

double CocoVideoMap(std::span<const ActionTube> tubes,
                    std::span<const GroundTruthTube> gt) {
  double sum = 0.0;
  for (double d : CocoThresholds()) sum += VideoMap(tubes, gt, d).map;
  return sum / 10.0;
}

std::vector<GroundTruthBox> FlattenGroundTruth(
    std::span<const GroundTruthTube> tubes) {
  std::vector<GroundTruthBox> out;
  for (const auto& t : tubes) {
    for (const auto& e : t.elements) {
      out.push_back({t.video_id, e.frame, {e.box, t.class_id}});
    }
  }
  return out;
}

namespace {

double RankedAp(const std::vector<bool>& tp, int num_gt) {
  std::unique_ptr<bool[]> flags(new bool[tp.size()]);
  std::copy(tp.begin(), tp.end(), flags.get());
  return AveragePrecision(std::span<const bool>(flags.get(), tp.size()), num_gt);
}

}  // namespace
}  // namespace pcsc
