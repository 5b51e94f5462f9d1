// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <span>
#include <vector>

namespace pcsc {

/// Axis-aligned rectangle in continuous pixel coordinates, corner
/// convention. Zero-area boxes are valid.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double Width() const { return x2 - x1; }
  double Height() const { return y2 - y1; }
  double Area() const { return Width() * Height(); }
  bool Valid() const { return x1 <= x2 && y1 <= y2; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct ScoredBox {
  Box box;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

double Iou(const Box& a, const Box& b);

// Greedy per-class suppression. A box is dropped when its IoU with an
// already-kept box of the same class is strictly greater than `threshold`.
// Equal scores keep their input order. Output is sorted by descending score.
std::vector<ScoredBox> Nms(std::span<const ScoredBox> dets, double threshold);

// Indices into `dets` of the survivors, in the output order of Nms().
std::vector<int> NmsIndices(std::span<const ScoredBox> dets, double threshold);

Box Clip(const Box& b, double width, double height);

// Removes exact duplicates (class, coordinates and score all equal), keeping
// the first occurrence.
std::vector<ScoredBox> Deduplicate(std::span<const ScoredBox> dets);

}  // namespace pcsc
