// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/fusion.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pcsc/error.h"

namespace pcsc {

FeatureMap::FeatureMap(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw StructuralError(fmt::format("invalid feature map shape {}x{}x{}",
                                      channels, height, width));
  }
  data_.assign(static_cast<size_t>(channels) * height * width, fill);
}

FeatureMap& FeatureMap::operator+=(const FeatureMap& o) {
  if (!SameShape(o)) {
    throw StructuralError(fmt::format(
        "feature map shape mismatch: {}x{}x{} vs {}x{}x{}", channels_, height_,
        width_, o.channels_, o.height_, o.width_));
  }
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

RoiFeature::RoiFeature(FeatureMap map) : map_(std::move(map)) {
  if (map_.height() != map_.width()) {
    throw StructuralError(fmt::format("ROI feature must be square, got {}x{}",
                                      map_.height(), map_.width()));
  }
}

void MessageParams::Validate() const {
  if (channels <= 0 || reduction < 1) {
    throw ValidationError(fmt::format(
        "message params need channels > 0 and reduction >= 1 (got {}, {})",
        channels, reduction));
  }
  if (channels % reduction != 0) {
    throw ValidationError(fmt::format(
        "reduction {} does not divide channel count {}", reduction, channels));
  }
  const size_t h = hidden();
  const size_t c = channels;
  if (w1.size() != h * c || b1.size() != h || w2.size() != c * h ||
      b2.size() != c) {
    throw StructuralError(
        fmt::format("message params shapes inconsistent with C={} r={}",
                    channels, reduction));
  }
}

MessageParams MessageParams::Zero(int channels, int reduction) {
  MessageParams p;
  p.channels = channels;
  p.reduction = reduction;
  if (channels <= 0 || reduction < 1 || channels % reduction != 0) {
    p.Validate();  // throws with a descriptive message
  }
  const size_t h = channels / reduction;
  p.w1.assign(h * channels, 0.0);
  p.b1.assign(h, 0.0);
  p.w2.assign(channels * h, 0.0);
  p.b2.assign(channels, 0.0);
  return p;
}

MessageParams MessageParams::Initialize(int channels, int reduction,
                                        uint64_t seed, double w1_range) {
  MessageParams p = Zero(channels, reduction);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-w1_range, w1_range);
  for (auto& w : p.w1) w = u(rng);
  return p;
}

FeatureMap MessageForward(const FeatureMap& src, const MessageParams& p) {
  return MessageForward(src, p, nullptr);
}

FeatureMap Fuse(const FeatureMap& target, const FeatureMap& src,
                const MessageParams& p) {
  if (!target.SameShape(src)) {
    throw StructuralError(fmt::format(
        "fuse: target {}x{}x{} and source {}x{}x{} differ", target.channels(),
        target.height(), target.width(), src.channels(), src.height(),
        src.width()));
  }
  FeatureMap out = MessageForward(src, p);
  out += target;
  return out;
}

RoiFeature FuseRoi(const RoiFeature& target, const RoiFeature& src,
                   const MessageParams& p) {
  return RoiFeature(Fuse(target.map(), src.map(), p));
}

namespace {

double Bilinear(const FeatureMap& fm, int c, double y, double x) {
  const double ys = std::clamp(y - 0.5, 0.0, fm.height() - 1.0);
  const double xs = std::clamp(x - 0.5, 0.0, fm.width() - 1.0);
  const int y0 = static_cast<int>(std::floor(ys));
  const int x0 = static_cast<int>(std::floor(xs));
  const int y1 = std::min(y0 + 1, fm.height() - 1);
  const int x1 = std::min(x0 + 1, fm.width() - 1);
  const double ly = ys - y0;
  const double lx = xs - x0;
  return (1 - ly) * ((1 - lx) * fm.at(c, y0, x0) + lx * fm.at(c, y0, x1)) +
         ly * ((1 - lx) * fm.at(c, y1, x0) + lx * fm.at(c, y1, x1));
}

}  // namespace

RoiFeature RoiPool(const FeatureMap& fm, const Box& box,
                   const RoiPoolParams& params) {
  const int s = params.output_size;
  const int n = params.samples_per_cell;
  if (s <= 0 || n <= 0) {
    throw ValidationError("roi pooling needs output_size and samples > 0");
  }
  FeatureMap out(fm.channels(), s, s, 0.0);
  Box scaled{box.x1 * params.spatial_scale, box.y1 * params.spatial_scale,
             box.x2 * params.spatial_scale, box.y2 * params.spatial_scale};
  scaled = Clip(scaled, fm.width(), fm.height());
  if (scaled.Area() <= 0.0) return RoiFeature(std::move(out));

  const double bin_w = scaled.Width() / s;
  const double bin_h = scaled.Height() / s;
  for (int c = 0; c < fm.channels(); ++c) {
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) {
        double acc = params.mode == RoiPoolMode::kMax ? -INFINITY : 0.0;
        for (int sy = 0; sy < n; ++sy) {
          const double y = scaled.y1 + (i + (sy + 0.5) / n) * bin_h;
          for (int sx = 0; sx < n; ++sx) {
            const double x = scaled.x1 + (j + (sx + 0.5) / n) * bin_w;
            const double v = Bilinear(fm, c, y, x);
            acc = params.mode == RoiPoolMode::kMax ? std::max(acc, v) : acc + v;
          }
        }
        out.at(c, i, j) = params.mode == RoiPoolMode::kMax ? acc : acc / (n * n);
      }
    }
  }
  return RoiFeature(std::move(out));
}

std::vector<double> ChannelMeans(const FeatureMap& fm) {
  std::vector<double> means(fm.channels(), 0.0);
  const auto data = fm.data();
  const size_t pixels = fm.pixels();
  for (int c = 0; c < fm.channels(); ++c) {
    double acc = 0.0;
    for (size_t k = 0; k < pixels; ++k) acc += data[c * pixels + k];
    means[c] = pixels ? acc / pixels : 0.0;
  }
  return means;
}

FeaturePyramid ImageLevelFuse(const FeaturePyramid& rgb,
                              const FeaturePyramid& flow,
                              const PyramidParams& params) {
  FeaturePyramid out;
  for (int level : kPyramidLevels) {
    auto r = rgb.find(level);
    auto f = flow.find(level);
    auto p = params.find(level);
    if (r == rgb.end() || f == flow.end() || p == params.end()) {
      throw StructuralError(
          fmt::format("image-level fusion: pyramid level {} missing", level));
    }
    out.emplace(level, Fuse(r->second, f->second, p->second));
  }
  return out;
}

void ApplyImageLevelPass(StreamPyramids& frame, const PyramidParams& params) {
  if (frame.rgb_fused) {
    throw StructuralError("image-level message passing already applied");
  }
  frame.rgb = ImageLevelFuse(frame.rgb, frame.flow, params);
  frame.rgb_fused = true;
}

}  // namespace pcsc
