// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame-level and video-level mean average precision.
//
// Detections are ranked by descending score (equal scores keep input order)
// and matched greedily: a detection is a true positive when its overlap with
// some still-unmatched ground truth of the same class (and same frame, or
// same video for tubes) is strictly greater than delta; it then consumes the
// best-overlapping such ground truth. AP is the area under the precision
// envelope (all-point interpolation).
#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcsc/cooperation.h"
#include "pcsc/geometry.h"
#include "pcsc/tubes.h"

namespace pcsc {

struct FrameBox {
  int frame = 0;
  Box box;
  friend bool operator==(const FrameBox&, const FrameBox&) = default;
};

struct GroundTruthTube {
  std::string video_id;
  int class_id = 0;
  std::vector<FrameBox> elements;  // strictly increasing frame
};

struct FrameDetection {
  std::string video_id;
  int frame = 0;
  ScoredBox det;
};

struct GroundTruthBox {
  std::string video_id;
  int frame = 0;
  LabeledBox gt;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

// (recall, precision) after each ranked detection.
std::vector<PrPoint> PrCurve(std::span<const bool> tp_in_rank_order,
                             int num_gt);

// All-point interpolated AP. Zero when num_gt is zero.
double AveragePrecision(std::span<const bool> tp_in_rank_order, int num_gt);

struct EvalResult {
  double delta = 0.0;
  std::map<int, double> ap;  // classes with at least one gt instance
  double map = 0.0;          // mean of `ap`; 0 when it is empty
  // Classes that appear only among the detections.
  std::vector<int> classes_without_gt;
};

// nullopt when class `class_id` has no ground truth.
std::optional<double> FrameAp(std::span<const FrameDetection> dets,
                              std::span<const GroundTruthBox> gt, int class_id,
                              double delta);
EvalResult FrameMap(std::span<const FrameDetection> dets,
                    std::span<const GroundTruthBox> gt, double delta);

// Spatio-temporal overlap of two tubes: |Ta ∩ Tb| / |Ta ∪ Tb| over frame
// index sets, times the mean spatial IoU on the shared frames.
template <typename A, typename B>
double TubeIou(const A& a, const B& b) {
  size_t i = 0;
  size_t j = 0;
  size_t shared = 0;
  double spatial = 0.0;
  while (i < a.elements.size() && j < b.elements.size()) {
    const int fa = a.elements[i].frame;
    const int fb = b.elements[j].frame;
    if (fa == fb) {
      spatial += Iou(a.elements[i].box, b.elements[j].box);
      ++shared;
      ++i;
      ++j;
    } else if (fa < fb) {
      ++i;
    } else {
      ++j;
    }
  }
  if (shared == 0) return 0.0;
  const double uni = a.elements.size() + b.elements.size() - shared;
  return (shared / uni) * (spatial / shared);
}

std::optional<double> VideoAp(std::span<const ActionTube> tubes,
                              std::span<const GroundTruthTube> gt,
                              int class_id, double delta);
EvalResult VideoMap(std::span<const ActionTube> tubes,
                    std::span<const GroundTruthTube> gt, double delta);

// 0.50, 0.55, ..., 0.95
std::array<double, 10> CocoThresholds();
double CocoFrameMap(std::span<const FrameDetection> dets,
                    std::span<const GroundTruthBox> gt);
double CocoVideoMap(std::span<const ActionTube> tubes,
                    std::span<const GroundTruthTube> gt);

std::vector<GroundTruthBox> FlattenGroundTruth(
    std::span<const GroundTruthTube> tubes);

}  // namespace pcsc
