// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/cooperation.h"

#include <fmt/format.h>

#include <string>

#include "pcsc/error.h"

namespace pcsc {
namespace {

void CheckUnit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError(fmt::format("{} must lie in [0, 1], got {}", name, v));
  }
}

std::vector<ScoredBox> CrossTerm(const std::vector<ScoredBox>& dets,
                                 const CooperationParams& params) {
  auto filter = [&](std::span<const ScoredBox> in) {
    std::vector<ScoredBox> out;
    for (const auto& d : in) {
      if (d.score >= params.confidence_min) out.push_back(d);
    }
    return out;
  };
  if (params.cross_order == CrossFilterOrder::kFilterThenNms) {
    return Nms(filter(dets), params.nms_cross);
  }
  return filter(Nms(dets, params.nms_cross));
}

}  // namespace

std::string_view StreamName(StreamId s) {
  return s == StreamId::kRgb ? "rgb" : "flow";
}

StreamId ParseStream(std::string_view name) {
  if (name == "rgb") return StreamId::kRgb;
  if (name == "flow") return StreamId::kFlow;
  throw ValidationError(fmt::format("unknown stream '{}'", name));
}

void CooperationParams::Validate() const {
  CheckUnit(nms_standard, "cooperation.nms_standard");
  CheckUnit(nms_cross, "cooperation.nms_cross");
  CheckUnit(confidence_min, "cooperation.confidence_min");
  if (nms_cross > nms_standard) {
    throw ValidationError(
        "cooperation.nms_cross must not exceed cooperation.nms_standard");
  }
  if (num_stages < 0) {
    throw ValidationError("cooperation.num_stages must be >= 0");
  }
}

DetectionSet IdentityHead::Detect(const ProposalSet& proposals) const {
  DetectionSet out{proposals.stream, proposals.stage, {}};
  out.detections.reserve(proposals.proposals.size());
  for (auto p : proposals.proposals) {
    p.box = Clip(p.box, width_, height_);
    out.detections.push_back(p);
  }
  return out;
}

StageState::StageState(double frame_width, double frame_height)
    : frame_width_(frame_width), frame_height_(frame_height) {}

bool StageState::Has(StreamId stream, int stage) const {
  return history_.count({stream, stage}) > 0;
}

const DetectionSet& StageState::Get(StreamId stream, int stage) const {
  auto it = history_.find({stream, stage});
  if (it == history_.end()) {
    throw StructuralError(fmt::format(
        "missing detection set for stream {} at stage {}", StreamName(stream),
        stage));
  }
  return it->second;
}

void StageState::SetInitial(DetectionSet rgb, DetectionSet flow) {
  if (rgb.stream != StreamId::kRgb || flow.stream != StreamId::kFlow) {
    throw StructuralError("initial detection sets have swapped streams");
  }
  rgb.stage = 0;
  flow.stage = 0;
  history_.clear();
  history_[{StreamId::kRgb, 0}] = std::move(rgb);
  history_[{StreamId::kFlow, 0}] = std::move(flow);
  stage_ = 0;
}

void StageState::Append(DetectionSet dets) {
  if (stage_ < 0) throw StructuralError("stage 0 has not been recorded");
  const int t = stage_ + 1;
  if (dets.stage != t || dets.stream != ScheduledStream(t)) {
    throw StructuralError(fmt::format(
        "stage {} expects stream {}, got {} at stage {}", t,
        StreamName(ScheduledStream(t)), StreamName(dets.stream), dets.stage));
  }
  history_[{dets.stream, t}] = std::move(dets);
  stage_ = t;
}

StageState InitStageState(const ProposalSet& rgb, const ProposalSet& flow,
                          const DetectionHead& head, double frame_width,
                          double frame_height) {
  StageState state(frame_width, frame_height);
  ProposalSet r = rgb;
  ProposalSet f = flow;
  r.stream = StreamId::kRgb;
  f.stream = StreamId::kFlow;
  r.stage = f.stage = 0;
  state.SetInitial(head.Detect(r), head.Detect(f));
  return state;
}

ProposalSet UpdateProposals(const StageState& state, int t,
                            const CooperationParams& params) {
  if (t < 1) throw StructuralError("proposal update needs stage t >= 1");
  const StreamId own = ScheduledStream(t);
  const int own_stage = t == 1 ? 0 : t - 2;
  const auto& own_dets = state.Get(own, own_stage).detections;
  const auto& other_dets = state.Get(Other(own), t - 1).detections;

  std::vector<ScoredBox> merged = own_dets;
  for (const auto& d : CrossTerm(other_dets, params)) merged.push_back(d);

  for (auto& p : merged) {
    p.box = Clip(p.box, state.frame_width(), state.frame_height());
  }
  return {own, t, Deduplicate(merged)};
}

StageState RunStage(StageState state, const DetectionHead& head,
                    const CooperationParams& params) {
  const int t = state.stage() + 1;
  ProposalSet proposals = UpdateProposals(state, t, params);
  DetectionSet dets = head.Detect(proposals);
  dets.stream = proposals.stream;
  dets.stage = t;
  state.Append(std::move(dets));
  return state;
}

StageState RunStages(StageState state, const DetectionHead& head,
                     const CooperationParams& params) {
  while (state.stage() < params.num_stages) {
    state = RunStage(std::move(state), head, params);
  }
  return state;
}

std::vector<ScoredBox> CombineOutputs(const StageState& state, int up_to,
                                      const CooperationParams& params) {
  if (up_to > state.stage()) {
    throw StructuralError(fmt::format(
        "cannot combine up to stage {}: only {} completed", up_to,
        state.stage()));
  }
  std::vector<ScoredBox> all;
  // Iterate stages in order, RGB before Flow within a stage, so the input
  // order of equal-score boxes is fixed.
  for (int s = 0; s <= up_to; ++s) {
    for (StreamId stream : {StreamId::kRgb, StreamId::kFlow}) {
      if (!state.Has(stream, s)) continue;
      const auto& d = state.Get(stream, s).detections;
      all.insert(all.end(), d.begin(), d.end());
    }
  }
  return Nms(Deduplicate(all), params.nms_standard);
}

std::vector<ProposalLabel> LabelProposals(std::span<const ScoredBox> proposals,
                                          std::span<const LabeledBox> gt) {
  std::vector<ProposalLabel> labels;
  labels.reserve(proposals.size());
  for (const auto& p : proposals) {
    ProposalLabel label;
    int best = -1;
    for (size_t g = 0; g < gt.size(); ++g) {
      const double v = Iou(p.box, gt[g].box);
      if (best < 0 || v > label.max_iou) {
        label.max_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && label.max_iou > 0.5) {
      label.positive = true;
      label.class_id = gt[best].class_id;
    }
    labels.push_back(label);
  }
  return labels;
}

}  // namespace pcsc
