// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <span>
#include <string>
#include <vector>

#include "pcsc/geometry.h"

namespace pcsc {

struct FrameDetections {
  int frame_idx = 0;
  std::vector<ScoredBox> dets;
};

struct TubeElement {
  int frame = 0;
  Box box;
  double score = 0.0;
  // Position of the source detection within its FrameDetections, or -1.
  int det_index = -1;

  friend bool operator==(const TubeElement&, const TubeElement&) = default;
};

struct ActionTube {
  std::string video_id;
  int class_id = 0;
  std::vector<TubeElement> elements;  // strictly increasing frame
  double score = 0.0;                 // mean element score

  int StartFrame() const { return elements.front().frame; }
  int EndFrame() const { return elements.back().frame; }

  friend bool operator==(const ActionTube&, const ActionTube&) = default;
};

// Mean element score. Throws ValidationError on an empty tube.
double TubeScore(const ActionTube& tube);

struct LinkParams {
  double lambda = 1.0;   // weight of IoU in the association value
  double iou_min = 0.1;  // minimum IoU with the tube's last box
  int max_gap = 3;       // consecutive frames a tube may go unmatched
  int min_len = 2;       // shorter tubes are discarded

  void Validate() const;
};

// Online greedy linking of class-`class_id` detections.
//
// Frames are visited in order. At each frame, every (live tube, detection)
// pair with IoU(last box, detection) >= iou_min is valued score + lambda*IoU
// and pairs are accepted in descending value (ties: earlier tube, then
// earlier detection) with each tube and detection used at most once.
// Unmatched detections open new tubes. A tube that has gone more than
// max_gap consecutive frames without a match is closed; the frame index
// difference between consecutive elements is therefore at most max_gap + 1.
// Tubes are returned in order of creation.
std::vector<ActionTube> LinkTubes(std::span<const FrameDetections> frames,
                                  int class_id, const LinkParams& params);

}  // namespace pcsc
