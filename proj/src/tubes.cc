// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/tubes.h"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

#include "pcsc/error.h"

namespace pcsc {

double TubeScore(const ActionTube& tube) {
  if (tube.elements.empty()) throw ValidationError("tube has no elements");
  double sum = 0.0;
  for (const auto& e : tube.elements) sum += e.score;
  return sum / tube.elements.size();
}

void LinkParams::Validate() const {
  if (lambda < 0.0) throw ValidationError("link.lambda must be >= 0");
  if (!(iou_min >= 0.0 && iou_min <= 1.0)) {
    throw ValidationError("link.iou_min must lie in [0, 1]");
  }
  if (max_gap < 0) throw ValidationError("link.max_gap must be >= 0");
  if (min_len < 1) throw ValidationError("link.min_len must be >= 1");
}

std::vector<ActionTube> LinkTubes(std::span<const FrameDetections> frames,
                                  int class_id, const LinkParams& params) {
  params.Validate();
  struct Live {
    ActionTube tube;
    bool open = true;
  };
  std::vector<Live> tubes;
  int previous_frame = -1;

  struct Pair {
    double value;
    int tube;
    int det;
  };

  for (const auto& fd : frames) {
    if (fd.frame_idx <= previous_frame) {
      throw ValidationError(fmt::format(
          "frames must be strictly increasing (frame {} after {})",
          fd.frame_idx, previous_frame));
    }
    previous_frame = fd.frame_idx;

    for (auto& t : tubes) {
      if (t.open && fd.frame_idx - t.tube.EndFrame() - 1 > params.max_gap) {
        t.open = false;
      }
    }

    std::vector<int> cand;
    for (int i = 0; i < static_cast<int>(fd.dets.size()); ++i) {
      if (fd.dets[i].class_id == class_id) cand.push_back(i);
    }

    std::vector<Pair> pairs;
    for (int t = 0; t < static_cast<int>(tubes.size()); ++t) {
      if (!tubes[t].open) continue;
      const Box& last = tubes[t].tube.elements.back().box;
      for (int d : cand) {
        const double iou = Iou(last, fd.dets[d].box);
        if (iou >= params.iou_min) {
          pairs.push_back({fd.dets[d].score + params.lambda * iou, t, d});
        }
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.value != b.value) return a.value > b.value;
      if (a.tube != b.tube) return a.tube < b.tube;
      return a.det < b.det;
    });

    std::vector<bool> tube_used(tubes.size(), false);
    std::vector<bool> det_used(fd.dets.size(), false);
    for (const auto& pr : pairs) {
      if (tube_used[pr.tube] || det_used[pr.det]) continue;
      tube_used[pr.tube] = true;
      det_used[pr.det] = true;
      const auto& d = fd.dets[pr.det];
      tubes[pr.tube].tube.elements.push_back(
          {fd.frame_idx, d.box, d.score, pr.det});
    }
    for (int d : cand) {
      if (det_used[d]) continue;
      Live fresh;
      fresh.tube.class_id = class_id;
      fresh.tube.elements.push_back(
          {fd.frame_idx, fd.dets[d].box, fd.dets[d].score, d});
      tubes.push_back(std::move(fresh));
    }
  }

  std::vector<ActionTube> out;
  for (auto& t : tubes) {
    if (static_cast<int>(t.tube.elements.size()) < params.min_len) continue;
    t.tube.score = TubeScore(t.tube);
    out.push_back(std::move(t.tube));
  }
  return out;
}

}  // namespace pcsc
