// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference check of the message function gradients.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "pcsc/fusion.h"

namespace pcsc::testing {

struct GradCheckInstance {
  FeatureMap src;
  FeatureMap grad_out;
  MessageParams params;
};

// Random instance whose pre-activations all stay at least `margin` away
// from the relu kink, so a step of 1e-5 never crosses it.
inline GradCheckInstance RandomGradInstance(std::mt19937_64& rng, int c, int r,
                                            int h, int w, double margin = 1e-3) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    GradCheckInstance g{FeatureMap(c, h, w), FeatureMap(c, h, w),
                        MessageParams::Zero(c, r)};
    for (auto& v : g.src.data()) v = u(rng);
    for (auto& v : g.grad_out.data()) v = u(rng);
    for (auto* vec : {&g.params.w1, &g.params.b1, &g.params.w2, &g.params.b2}) {
      for (auto& v : *vec) v = u(rng);
    }
    MessageCache cache;
    MessageForward(g.src, g.params, &cache);
    const bool clear = std::all_of(cache.pre_activation.begin(), cache.pre_activation.end(),
                                   [&](double a) { return std::abs(a) >= margin; });
    if (clear) return g;
  }
}

// Loss whose gradient with respect to the message output is grad_out.
inline double Loss(const GradCheckInstance& g, const FeatureMap& src,
                   const MessageParams& p) {
  const FeatureMap out = MessageForward(src, p);
  double l = 0.0;
  for (size_t i = 0; i < out.size(); ++i) l += out.data()[i] * g.grad_out.data()[i];
  return l;
}

// |a - n| / max(|a|, |n|); falls back to the absolute difference when both
// are below `floor` (exactly-zero gradients of dead units).
inline double RelativeError(double a, double n, double floor = 1e-6) {
  const double scale = std::max(std::abs(a), std::abs(n));
  return scale < floor ? std::abs(a - n) : std::abs(a - n) / scale;
}

// Maximum relative error over every source element and every parameter.
inline double MaxGradientError(const GradCheckInstance& g, double step = 1e-5) {
  MessageCache cache;
  MessageForward(g.src, g.params, &cache);
  const MessageGrads grads = MessageBackward(g.grad_out, cache, g.params);
  double worst = 0.0;

  FeatureMap src = g.src;
  for (size_t i = 0; i < src.size(); ++i) {
    const double orig = src.data()[i];
    src.data()[i] = orig + step;
    const double up = Loss(g, src, g.params);
    src.data()[i] = orig - step;
    const double down = Loss(g, src, g.params);
    src.data()[i] = orig;
    worst = std::max(worst, RelativeError(grads.src.data()[i], (up - down) / (2 * step)));
  }

  MessageParams p = g.params;
  auto check = [&](std::vector<double>& values, const std::vector<double>& analytic) {
    for (size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + step;
      const double up = Loss(g, g.src, p);
      values[i] = orig - step;
      const double down = Loss(g, g.src, p);
      values[i] = orig;
      worst = std::max(worst, RelativeError(analytic[i], (up - down) / (2 * step)));
    }
  };
  check(p.w1, grads.params.w1);
  check(p.b1, grads.params.b1);
  check(p.w2, grads.params.w2);
  check(p.b2, grads.params.b2);
  return worst;
}

}  // namespace pcsc::testing
