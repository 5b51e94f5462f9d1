// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Region-proposal-level cooperation between the RGB and Flow streams.
//
// Stage 0 runs each stream's detection head on its own proposals. Every
// later stage t refines one stream (RGB at odd t, Flow at even t): its
// proposals are its own detections from stage t-2 (stage 0 when t == 1)
// joined with the other stream's detections from stage t-1, after those are
// confidence-filtered and re-suppressed at the lower cross-stream threshold.
#pragma once

#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "pcsc/geometry.h"

namespace pcsc {

enum class StreamId { kRgb, kFlow };

constexpr StreamId Other(StreamId s) {
  return s == StreamId::kRgb ? StreamId::kFlow : StreamId::kRgb;
}

std::string_view StreamName(StreamId s);
// Accepts "rgb" or "flow"; throws ValidationError otherwise.
StreamId ParseStream(std::string_view name);

// Stream refined at stage `t` (t >= 1).
constexpr StreamId ScheduledStream(int t) {
  return t % 2 == 1 ? StreamId::kRgb : StreamId::kFlow;
}

struct ProposalSet {
  StreamId stream = StreamId::kRgb;
  int stage = 0;
  std::vector<ScoredBox> proposals;
};

struct DetectionSet {
  StreamId stream = StreamId::kRgb;
  int stage = 0;
  std::vector<ScoredBox> detections;
};

// Order in which the cross-stream term is filtered and suppressed.
enum class CrossFilterOrder { kFilterThenNms, kNmsThenFilter };

struct CooperationParams {
  double nms_standard = 0.5;
  double nms_cross = 0.3;
  double confidence_min = 0.05;
  int num_stages = 4;
  CrossFilterOrder cross_order = CrossFilterOrder::kFilterThenNms;

  // Throws ValidationError on out-of-range values.
  void Validate() const;
};

// The mapping from a proposal set to a detection set. Implementations must
// clip their output and be deterministic.
class DetectionHead {
 public:
  virtual ~DetectionHead() = default;
  virtual DetectionSet Detect(const ProposalSet& proposals) const = 0;
};

// Returns proposals as detections (same stream and stage), clipped to the
// frame. Useful as a neutral head for tests and ablations.
class IdentityHead : public DetectionHead {
 public:
  IdentityHead(double width, double height) : width_(width), height_(height) {}
  DetectionSet Detect(const ProposalSet& proposals) const override;

 private:
  double width_;
  double height_;
};

class StageState {
 public:
  StageState(double frame_width, double frame_height);

  double frame_width() const { return frame_width_; }
  double frame_height() const { return frame_height_; }
  // Last completed stage; -1 before stage 0 has been recorded.
  int stage() const { return stage_; }

  bool Has(StreamId stream, int stage) const;
  // Throws StructuralError naming the (stream, stage) pair when absent.
  const DetectionSet& Get(StreamId stream, int stage) const;

  // Records stage-0 detections for both streams.
  void SetInitial(DetectionSet rgb, DetectionSet flow);
  // Records the detections of the next stage; `dets.stage` must equal
  // stage() + 1 and `dets.stream` the scheduled stream.
  void Append(DetectionSet dets);

  const std::map<std::pair<StreamId, int>, DetectionSet>& history() const {
    return history_;
  }

 private:
  double frame_width_;
  double frame_height_;
  int stage_ = -1;
  std::map<std::pair<StreamId, int>, DetectionSet> history_;
};

// Runs the head on both streams' initial proposals and returns a state at
// stage 0.
StageState InitStageState(const ProposalSet& rgb, const ProposalSet& flow,
                          const DetectionHead& head, double frame_width,
                          double frame_height);

// Builds the proposal set for stage `t` (t >= 1) from the stored history.
ProposalSet UpdateProposals(const StageState& state, int t,
                            const CooperationParams& params);

// Computes stage state.stage()+1 and returns the advanced state.
StageState RunStage(StageState state, const DetectionHead& head,
                    const CooperationParams& params);

// Advances `state` until params.num_stages stages have completed.
StageState RunStages(StageState state, const DetectionHead& head,
                     const CooperationParams& params);

// Per-class NMS (at nms_standard) over every stored detection set of both
// streams with stage <= up_to.
std::vector<ScoredBox> CombineOutputs(const StageState& state, int up_to,
                                      const CooperationParams& params);

struct LabeledBox {
  Box box;
  int class_id = 0;
};

struct ProposalLabel {
  bool positive = false;
  int class_id = -1;  // class of the best-overlapping gt when positive
  double max_iou = 0.0;
};

// positive iff the best IoU with any gt box is > 0.5. Ties in the best IoU
// resolve to the earliest gt.
std::vector<ProposalLabel> LabelProposals(std::span<const ScoredBox> proposals,
                                          std::span<const LabeledBox> gt);

}  // namespace pcsc
