// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// INI scenario files. Every key belongs to a section; unknown sections or
// keys are rejected. Missing keys keep their defaults.
//
//   [scenario]   num_videos frames_per_video num_classes tubes_per_video
//                frame_width frame_height min_box max_box min_tube_len
//                max_tube_len max_speed proposals_per_object complementarity
//                seed num_seeds train_fraction
//   [rgb] [flow] miss_prob jitter_sigma fp_rate boundary_pad
//   [head]       regression_fraction jitter_sigma score_noise feature_weight
//                distractor_factor
//   [features]   channels reduction stride noise message_gain roi_size
//                share_roi_params
//   [cooperation] nms_standard nms_cross confidence_min num_stages
//                cross_order (filter_then_nms | nms_then_filter)
//                feature_cooperation
//   [link]       lambda iou_min max_gap min_len
//   [refine]     window tau min_seg_len epochs learning_rate batch_size
#pragma once

#include <cstdint>
#include <string>

#include "pcsc/harness.h"

namespace pcsc {

// Throws ValidationError with file/line context.
ScenarioConfig ParseConfig(const std::string& text,
                           const std::string& source = "<config>");
ScenarioConfig LoadConfig(const std::string& path);

// Canonical INI rendering of every key; ParseConfig(ConfigToIni(c)) == c up
// to 6 significant digits.
std::string ConfigToIni(const ScenarioConfig& cfg);

// FNV-1a of ConfigToIni, as 16 hex digits.
std::string ConfigHash(const ScenarioConfig& cfg);

}  // namespace pcsc
