// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic two-stream world, simulated detection head and the end-to-end
// experiment driver.
//
// A world is a set of videos holding class-labelled ground-truth tubes that
// move linearly across the frame. Each stream sees a subset of the tubes:
// for the tubes it sees it emits jittered proposals at every frame of the
// tube, plus proposals on "distractor" boxes that continue the tube for
// `boundary_pad` frames before and after its true extent. Spurious boxes of
// random class are added at `fp_rate` per frame. Dense per-stream feature
// maps render an actionness channel (true tube boxes), an objectness channel
// (true and distractor boxes) and noise.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcsc/cooperation.h"
#include "pcsc/eval.h"
#include "pcsc/fusion.h"
#include "pcsc/refine.h"
#include "pcsc/tubes.h"

namespace pcsc {

struct StreamNoise {
  double miss_prob = 0.3;     // probability a tube is invisible to the stream
  double jitter_sigma = 2.0;  // proposal coordinate noise, pixels
  double fp_rate = 0.5;       // spurious proposals per frame (Poisson mean)
  int boundary_pad = 0;       // distractor frames on each side of a tube
};

struct HeadNoise {
  double regression_fraction = 0.5;  // move toward the nearest object
  double jitter_sigma = 1.0;         // post-regression coordinate noise
  double score_noise = 0.15;         // multiplicative score noise (sigma)
  double feature_weight = 0.3;       // weight of ROI objectness evidence
  double distractor_factor = 0.8;    // score scale on distractor objects
};

struct FeatureConfig {
  int channels = 4;
  int reduction = 2;
  int stride = 4;        // level-2 stride; level l has stride * 2^(l-2)
  double noise = 0.3;    // per-pixel Gaussian noise
  double message_gain = 1.0;
  int roi_size = 7;
  bool share_roi_params = false;
};

struct ScenarioConfig {
  int num_videos = 10;
  int frames_per_video = 40;
  int num_classes = 3;
  int tubes_per_video = 2;
  double frame_width = 160.0;
  double frame_height = 120.0;
  double min_box = 8.0;
  double max_box = 16.0;
  int min_tube_len = 8;
  int max_tube_len = 16;
  double max_speed = 1.0;  // pixels per frame
  int proposals_per_object = 2;
  StreamNoise rgb;
  StreamNoise flow;
  // Fraction of the RGB-missed tubes that Flow misses too.
  double complementarity = 0.0;
  uint64_t seed = 1;
  int num_seeds = 1;
  double train_fraction = 0.5;

  HeadNoise head;
  FeatureConfig features;
  CooperationParams cooperation;
  bool feature_cooperation = true;
  LinkParams link;
  RefineParams refine;
  TrainParams train;

  const StreamNoise& stream(StreamId s) const {
    return s == StreamId::kRgb ? rgb : flow;
  }
  // Throws ValidationError naming the offending key.
  void Validate() const;
};

// An object the simulated head can lock onto in one frame.
struct WorldObject {
  Box box;
  int class_id = 0;
  int tube = 0;
  bool action = true;  // false for boundary distractors
};

struct WorldTube {
  GroundTruthTube gt;
  std::vector<FrameBox> before;  // distractor frames preceding the action
  std::vector<FrameBox> after;   // distractor frames following it
  std::array<bool, 2> missed{false, false};  // indexed by StreamId
  std::array<int, 2> pad{0, 0};              // distractor frames per stream
};

struct VideoWorld {
  std::string id;
  bool train = false;
  std::vector<WorldTube> tubes;
  // proposals[frame][stream]
  std::vector<std::array<std::vector<ScoredBox>, 2>> proposals;
};

struct SyntheticWorld {
  uint64_t seed = 0;
  int num_classes = 0;
  int frames_per_video = 0;
  double frame_width = 0.0;
  double frame_height = 0.0;
  std::vector<VideoWorld> videos;
};

// Deterministic in `seed`. Throws ValidationError on an infeasible config.
SyntheticWorld GenerateWorld(const ScenarioConfig& cfg, uint64_t seed);

// Objects present in `frame` (true boxes and distractors of every tube).
std::vector<WorldObject> FrameObjects(const VideoWorld& video, int frame);
// Objects the given stream perceives in `frame`.
std::vector<WorldObject> VisibleObjects(const VideoWorld& video, int frame,
                                        StreamId stream);

std::vector<GroundTruthTube> GroundTruth(const SyntheticWorld& world,
                                         bool include_train = true,
                                         bool include_test = true);

// Level 2..5 feature maps of one stream in one frame.
FeaturePyramid RenderPyramid(const SyntheticWorld& world, int video, int frame,
                             StreamId stream, const FeatureConfig& cfg);

// Fixed message function that forwards the positive part of the actionness
// and objectness channels with the configured gain.
MessageParams HarnessMessageParams(const FeatureConfig& cfg);

// Features available to the head in one frame.
struct HeadFeatures {
  StreamPyramids pyramids;
  RoiPoolParams roi;
  std::vector<MessageParams> roi_params;  // index = stage; entry 0 unused
  bool cooperate = true;
};

// The simulated detection head. Each proposal is moved toward its best
// overlapping object by regression_fraction, jittered and clipped; its score
// is (1 - w) * IoU + w * evidence, scaled on distractors and perturbed
// multiplicatively, where the evidence is the mean objectness of the
// proposal's ROI feature (after ROI-level fusion when cooperating). Without
// features the score is the IoU term alone. Per-class NMS at the standard
// threshold is applied to the output.
class SimulatedHead : public DetectionHead {
 public:
  SimulatedHead(std::vector<WorldObject> objects, HeadNoise noise,
                double nms_threshold, double frame_width, double frame_height,
                uint64_t seed, const HeadFeatures* features = nullptr);

  DetectionSet Detect(const ProposalSet& proposals) const override;

 private:
  double Evidence(const Box& box, StreamId stream, int stage) const;

  std::vector<WorldObject> objects_;
  HeadNoise noise_;
  double nms_threshold_;
  double width_;
  double height_;
  uint64_t seed_;
  const HeadFeatures* features_;
};

// Stage outputs of one video.
struct VideoStageResult {
  // combined[t][k]: combined output (stages 0..t) of frame k.
  std::vector<std::vector<std::vector<ScoredBox>>> combined;
  // Actionness descriptor of each box of combined.back()[k].
  std::vector<std::vector<std::vector<double>>> descriptors;
};

VideoStageResult RunVideoStages(const SyntheticWorld& world, int video,
                                const ScenarioConfig& cfg);

// Links the final combined detections of a video into tubes of every class.
// `descriptors`, when non-null, receives the descriptor of each element.
std::vector<ActionTube> LinkVideo(
    const std::string& video_id, const VideoStageResult& stages,
    int num_classes, const LinkParams& params,
    std::vector<std::vector<std::vector<double>>>* descriptors = nullptr);

std::vector<FrameDetection> StageDetections(const std::string& video_id,
                                            const VideoStageResult& stages,
                                            int stage);

// Fraction of gt boxes covered (IoU > 0.5) by some detection.
double GroundTruthCoverage(std::span<const FrameDetection> dets,
                           std::span<const GroundTruthBox> gt);

struct SeedResult {
  uint64_t seed = 0;
  std::vector<double> stage_frame_map;   // delta 0.5, all videos
  std::vector<double> stage_coverage;
  double video_map_before = 0.0;         // delta 0.5, test videos
  double video_map_after = 0.0;
  int degenerate_classes = 0;
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  std::vector<double> mean_stage_frame_map;
  double mean_video_map_before = 0.0;
  double mean_video_map_after = 0.0;
  double RefinementDelta() const {
    return mean_video_map_after - mean_video_map_before;
  }
};

// Full pipeline on an existing world: stages, linking on the final combined
// output, actionness training on the train split, refinement of test tubes.
struct WorldRun {
  std::vector<VideoStageResult> videos;
  std::vector<ActionTube> tubes;  // every video, in video then class order
  std::vector<std::vector<std::vector<double>>> descriptors;  // per tube element
  std::vector<bool> tube_is_train;
  ActionnessClassifier classifier;
  SeedResult metrics;
};
WorldRun RunWorld(const ScenarioConfig& cfg, const SyntheticWorld& world);

SeedResult RunSeed(const ScenarioConfig& cfg, uint64_t seed);

// Parallel over (seed, video); results are reduced in seed order, so the
// outcome does not depend on the thread count.
ExperimentResult RunExperiment(const ScenarioConfig& cfg);

}  // namespace pcsc
