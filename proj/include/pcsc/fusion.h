// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Feature-level cooperation. A message function made of two 1x1
// convolutions (channel reduction, relu, channel restore) turns the source
// stream's features into a message that is added element-wise to the target
// stream's features:
//
//   fused = W2 * relu(W1 * src + b1) + b2 + target      (per pixel)
//
// The kernels here are OpenMP-parallel over pixels; serial references with
// identical math live in fusion_reference.h.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "pcsc/cooperation.h"
#include "pcsc/geometry.h"

namespace pcsc {

// Dense C x H x W grid, channel-major.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, double fill = 0.0);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int pixels() const { return height_ * width_; }
  size_t size() const { return data_.size(); }

  double& at(int c, int y, int x) {
    return data_[(static_cast<size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool SameShape(const FeatureMap& o) const {
    return channels_ == o.channels_ && height_ == o.height_ &&
           width_ == o.width_;
  }

  FeatureMap& operator+=(const FeatureMap& o);
  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Fixed-size S x S pooled feature of one box.
class RoiFeature {
 public:
  // Throws StructuralError unless height == width.
  explicit RoiFeature(FeatureMap map);

  int size() const { return map_.height(); }
  const FeatureMap& map() const { return map_; }
  FeatureMap& map() { return map_; }

  friend bool operator==(const RoiFeature&, const RoiFeature&) = default;

 private:
  FeatureMap map_;
};

// Parameters of the message function. Row-major: w1 is hidden x channels,
// w2 is channels x hidden, hidden = channels / reduction.
struct MessageParams {
  int channels = 0;
  int reduction = 1;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  int hidden() const { return channels / reduction; }

  // Throws StructuralError on inconsistent shapes, ValidationError when
  // reduction does not divide channels.
  void Validate() const;

  static MessageParams Zero(int channels, int reduction);
  // W1 uniform in [-w1_range, w1_range]; b1, W2 and b2 zero, so fusion is
  // the identity until W2/b2 are trained.
  static MessageParams Initialize(int channels, int reduction, uint64_t seed,
                                  double w1_range = 0.1);

  friend bool operator==(const MessageParams&, const MessageParams&) = default;
};

// Forward intermediates needed by MessageBackward.
struct MessageCache {
  FeatureMap src;
  std::vector<double> pre_activation;  // hidden x pixels
};

struct MessageGrads {
  FeatureMap src;
  MessageParams params;  // gradient w.r.t. each parameter, same layout
};

FeatureMap MessageForward(const FeatureMap& src, const MessageParams& p);
FeatureMap MessageForward(const FeatureMap& src, const MessageParams& p,
                          MessageCache* cache);

// Exact gradients of MessageForward. relu'(0) is taken as 0. Parameter
// gradients are reduced over fixed pixel blocks in a fixed order, so the
// result does not depend on the thread count.
MessageGrads MessageBackward(const FeatureMap& grad_out,
                             const MessageCache& cache,
                             const MessageParams& p);

// target + MessageForward(src).
FeatureMap Fuse(const FeatureMap& target, const FeatureMap& src,
                const MessageParams& p);
RoiFeature FuseRoi(const RoiFeature& target, const RoiFeature& src,
                   const MessageParams& p);

// At stage t the source of the ROI-level message is the stream that is not
// being refined: Flow -> RGB at odd stages, RGB -> Flow at even stages.
constexpr StreamId RoiMessageTarget(int t) { return ScheduledStream(t); }
constexpr StreamId RoiMessageSource(int t) { return Other(ScheduledStream(t)); }

enum class RoiPoolMode { kAverage, kMax };

struct RoiPoolParams {
  int output_size = 7;
  // Image-to-feature-map coordinate scale (1 / stride).
  double spatial_scale = 1.0;
  int samples_per_cell = 1;  // per dimension
  RoiPoolMode mode = RoiPoolMode::kAverage;
};

// Splits the (scaled, clipped) box into output_size^2 equal cells and
// bilinearly samples each cell at regularly spaced points, reducing by
// average or max. Feature cell (y, x) is centred at (y + 0.5, x + 0.5). A box
// with zero area after scaling and clipping yields an all-zero feature.
RoiFeature RoiPool(const FeatureMap& fm, const Box& box,
                   const RoiPoolParams& params = {});

// Mean of each channel over the spatial grid.
std::vector<double> ChannelMeans(const FeatureMap& fm);

using FeaturePyramid = std::map<int, FeatureMap>;
using PyramidParams = std::map<int, MessageParams>;
inline constexpr std::array<int, 4> kPyramidLevels = {2, 3, 4, 5};

// rgb[l] + message(flow[l]) for every pyramid level. Throws StructuralError
// when a level is missing from any input.
FeaturePyramid ImageLevelFuse(const FeaturePyramid& rgb,
                              const FeaturePyramid& flow,
                              const PyramidParams& params);

// Per-frame feature pyramids of both streams. The image-level message
// (Flow -> RGB) may be applied to a given instance once only.
struct StreamPyramids {
  FeaturePyramid rgb;
  FeaturePyramid flow;
  bool rgb_fused = false;
};

// Throws StructuralError when the pass has already been applied.
void ApplyImageLevelPass(StreamPyramids& frame, const PyramidParams& params);

}  // namespace pcsc
