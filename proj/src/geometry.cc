// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/geometry.h"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

namespace pcsc {

double Iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.Area() + b.Area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<int> NmsIndices(std::span<const ScoredBox> dets,
                            double threshold) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<int> kept;
  for (int idx : order) {
    bool suppressed = false;
    for (int k : kept) {
      if (dets[k].class_id == dets[idx].class_id &&
          Iou(dets[k].box, dets[idx].box) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

std::vector<ScoredBox> Nms(std::span<const ScoredBox> dets, double threshold) {
  std::vector<ScoredBox> out;
  for (int idx : NmsIndices(dets, threshold)) out.push_back(dets[idx]);
  return out;
}

Box Clip(const Box& b, double width, double height) {
  Box c;
  c.x1 = std::clamp(b.x1, 0.0, width);
  c.y1 = std::clamp(b.y1, 0.0, height);
  c.x2 = std::clamp(b.x2, 0.0, width);
  c.y2 = std::clamp(b.y2, 0.0, height);
  return c;
}

std::vector<ScoredBox> Deduplicate(std::span<const ScoredBox> dets) {
  using Key = std::tuple<int, double, double, double, double, double>;
  std::set<Key> seen;
  std::vector<ScoredBox> out;
  out.reserve(dets.size());
  for (const auto& d : dets) {
    Key key{d.class_id, d.box.x1, d.box.y1, d.box.x2, d.box.y2, d.score};
    if (seen.insert(key).second) out.push_back(d);
  }
  return out;
}

}  // namespace pcsc
