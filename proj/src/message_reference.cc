// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include <fmt/format.h>

#include "pcsc/error.h"
#include "pcsc/fusion_reference.h"

namespace pcsc::reference {

FeatureMap MessageForward(const FeatureMap& src, const MessageParams& p,
                          MessageCache* cache) {
  p.Validate();
  if (src.channels() != p.channels) {
    throw StructuralError(fmt::format(
        "message input has {} channels, params expect {}", src.channels(),
        p.channels));
  }
  const int hidden = p.hidden();
  FeatureMap out(p.channels, src.height(), src.width());
  std::vector<double> pre(static_cast<size_t>(hidden) * src.pixels());
  std::vector<double> act(hidden);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const int px = y * src.width() + x;
      for (int k = 0; k < hidden; ++k) {
        double h = p.b1[k];
        for (int c = 0; c < p.channels; ++c) {
          h += p.w1[k * p.channels + c] * src.at(c, y, x);
        }
        pre[static_cast<size_t>(k) * src.pixels() + px] = h;
        act[k] = h > 0.0 ? h : 0.0;
      }
      for (int c = 0; c < p.channels; ++c) {
        double v = p.b2[c];
        for (int k = 0; k < hidden; ++k) v += p.w2[c * hidden + k] * act[k];
        out.at(c, y, x) = v;
      }
    }
  }
  if (cache) {
    cache->src = src;
    cache->pre_activation = std::move(pre);
  }
  return out;
}

MessageGrads MessageBackward(const FeatureMap& grad_out,
                             const MessageCache& cache,
                             const MessageParams& p) {
  p.Validate();
  const FeatureMap& src = cache.src;
  if (!grad_out.SameShape(src) || src.channels() != p.channels) {
    throw StructuralError("message backward: shape mismatch");
  }
  const int hidden = p.hidden();
  MessageGrads grads{FeatureMap(p.channels, src.height(), src.width()),
                     MessageParams::Zero(p.channels, p.reduction)};
  std::vector<double> gh(hidden);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const int px = y * src.width() + x;
      for (int k = 0; k < hidden; ++k) {
        const double h = cache.pre_activation[static_cast<size_t>(k) * src.pixels() + px];
        const double a = h > 0.0 ? h : 0.0;
        double ga = 0.0;
        for (int c = 0; c < p.channels; ++c) {
          grads.params.w2[c * hidden + k] += grad_out.at(c, y, x) * a;
          ga += p.w2[c * hidden + k] * grad_out.at(c, y, x);
        }
        gh[k] = h > 0.0 ? ga : 0.0;
        grads.params.b1[k] += gh[k];
        for (int c = 0; c < p.channels; ++c) {
          grads.params.w1[k * p.channels + c] += gh[k] * src.at(c, y, x);
        }
      }
      for (int c = 0; c < p.channels; ++c) {
        grads.params.b2[c] += grad_out.at(c, y, x);
        double v = 0.0;
        for (int k = 0; k < hidden; ++k) v += p.w1[k * p.channels + c] * gh[k];
        grads.src.at(c, y, x) = v;
      }
    }
  }
  return grads;
}

}  // namespace pcsc::reference
