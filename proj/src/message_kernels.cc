// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// OpenMP kernels for the per-pixel message function.
#include <fmt/format.h>

#include <algorithm>

#include "pcsc/error.h"
#include "pcsc/fusion.h"

namespace pcsc {
namespace {

// Fixed block count for the parameter-gradient reduction; independent of
// the number of threads.
constexpr int kReductionBlocks = 64;

void CheckInput(const FeatureMap& src, const MessageParams& p) {
  p.Validate();
  if (src.channels() != p.channels) {
    throw StructuralError(fmt::format(
        "message input has {} channels, params expect {}", src.channels(),
        p.channels));
  }
}

}  // namespace

FeatureMap MessageForward(const FeatureMap& src, const MessageParams& p,
                          MessageCache* cache) {
  CheckInput(src, p);
  const int channels = p.channels;
  const int hidden = p.hidden();
  const int pixels = src.pixels();
  FeatureMap out(channels, src.height(), src.width());
  std::vector<double> pre(static_cast<size_t>(hidden) * pixels);

  const double* in = src.data().data();
  double* dst = out.data().data();
  const double* w1 = p.w1.data();
  const double* w2 = p.w2.data();

#pragma omp parallel
  {
    std::vector<double> a(hidden);
#pragma omp for schedule(static)
    for (int px = 0; px < pixels; ++px) {
      for (int k = 0; k < hidden; ++k) {
        double h = p.b1[k];
        for (int c = 0; c < channels; ++c) {
          h += w1[k * channels + c] * in[static_cast<size_t>(c) * pixels + px];
        }
        pre[static_cast<size_t>(k) * pixels + px] = h;
        a[k] = h > 0.0 ? h : 0.0;
      }
      for (int c = 0; c < channels; ++c) {
        double v = p.b2[c];
        for (int k = 0; k < hidden; ++k) v += w2[c * hidden + k] * a[k];
        dst[static_cast<size_t>(c) * pixels + px] = v;
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
  CheckInput(cache.src, p);
  if (!grad_out.SameShape(cache.src)) {
    throw StructuralError("message backward: gradient shape differs from input");
  }
  const int channels = p.channels;
  const int hidden = p.hidden();
  const int pixels = cache.src.pixels();
  if (cache.pre_activation.size() != static_cast<size_t>(hidden) * pixels) {
    throw StructuralError("message backward: cache does not match params");
  }

  MessageGrads grads{FeatureMap(channels, cache.src.height(), cache.src.width()),
                     MessageParams::Zero(channels, p.reduction)};
  const int blocks = std::min(kReductionBlocks, pixels);
  const size_t param_count =
      p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size();
  std::vector<double> partial(static_cast<size_t>(blocks) * param_count, 0.0);

  const double* in = cache.src.data().data();
  const double* g = grad_out.data().data();
  const double* pre = cache.pre_activation.data();
  double* gsrc = grads.src.data().data();

#pragma omp parallel for schedule(static)
  for (int b = 0; b < blocks; ++b) {
    double* gw1 = partial.data() + static_cast<size_t>(b) * param_count;
    double* gb1 = gw1 + p.w1.size();
    double* gw2 = gb1 + p.b1.size();
    double* gb2 = gw2 + p.w2.size();
    std::vector<double> gh(hidden);
    const int begin = static_cast<int>(static_cast<long>(pixels) * b / blocks);
    const int end = static_cast<int>(static_cast<long>(pixels) * (b + 1) / blocks);
    for (int px = begin; px < end; ++px) {
      for (int k = 0; k < hidden; ++k) {
        const double h = pre[static_cast<size_t>(k) * pixels + px];
        const double a = h > 0.0 ? h : 0.0;
        double ga = 0.0;
        for (int c = 0; c < channels; ++c) {
          const double go = g[static_cast<size_t>(c) * pixels + px];
          gw2[c * hidden + k] += go * a;
          ga += p.w2[c * hidden + k] * go;
        }
        gh[k] = h > 0.0 ? ga : 0.0;
        gb1[k] += gh[k];
        for (int c = 0; c < channels; ++c) {
          gw1[k * channels + c] += gh[k] * in[static_cast<size_t>(c) * pixels + px];
        }
      }
      for (int c = 0; c < channels; ++c) {
        gb2[c] += g[static_cast<size_t>(c) * pixels + px];
        double v = 0.0;
        for (int k = 0; k < hidden; ++k) v += p.w1[k * channels + c] * gh[k];
        gsrc[static_cast<size_t>(c) * pixels + px] = v;
      }
    }
  }

  MessageParams& gp = grads.params;
  for (int b = 0; b < blocks; ++b) {
    const double* base = partial.data() + static_cast<size_t>(b) * param_count;
    size_t off = 0;
    for (auto* v : {&gp.w1, &gp.b1, &gp.w2, &gp.b2}) {
      for (auto& x : *v) x += base[off++];
    }
  }
  return grads;
}

}  // namespace pcsc
