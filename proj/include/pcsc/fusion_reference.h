// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-threaded reference kernels for the message function. Kept for
// testing and benchmarking the parallel versions in fusion.h.
#pragma once

#include "pcsc/fusion.h"

namespace pcsc::reference {

FeatureMap MessageForward(const FeatureMap& src, const MessageParams& p,
                          MessageCache* cache = nullptr);

MessageGrads MessageBackward(const FeatureMap& grad_out,
                             const MessageCache& cache,
                             const MessageParams& p);

}  // namespace pcsc::reference
