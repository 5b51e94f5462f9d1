// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/harness.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pcsc/error.h"
#include "pcsc/random.h"

namespace pcsc {
namespace {

constexpr double kMaxTubeOverlap = 0.3;
constexpr int kPlacementAttempts = 50;

int Index(StreamId s) { return static_cast<int>(s); }

void Require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ValidationError(fmt::format("config key '{}': {}", key, what));
}

Box Ordered(Box b) {
  if (b.x1 > b.x2) std::swap(b.x1, b.x2);
  if (b.y1 > b.y2) std::swap(b.y1, b.y2);
  return b;
}

Box Jitter(const Box& b, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Box out{b.x1 + sigma * n(rng), b.y1 + sigma * n(rng), b.x2 + sigma * n(rng),
          b.y2 + sigma * n(rng)};
  return Ordered(out);
}

struct Trajectory {
  int first = 0;  // frame of boxes[0]
  std::vector<Box> boxes;
  const Box* At(int frame) const {
    const int k = frame - first;
    if (k < 0 || k >= static_cast<int>(boxes.size())) return nullptr;
    return &boxes[k];
  }
};

Trajectory MakeTrajectory(int first, int last, double w, double h,
                          const ScenarioConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0.0, cfg.frame_width - w);
  std::uniform_real_distribution<double> uy(0.0, cfg.frame_height - h);
  std::uniform_real_distribution<double> uv(-cfg.max_speed, cfg.max_speed);
  double x = ux(rng);
  double y = uy(rng);
  double vx = uv(rng);
  double vy = uv(rng);
  Trajectory t;
  t.first = first;
  for (int f = first; f <= last; ++f) {
    t.boxes.push_back({x, y, x + w, y + h});
    x += vx;
    y += vy;
    if (x < 0.0 || x + w > cfg.frame_width) {
      vx = -vx;
      x = std::clamp(x, 0.0, cfg.frame_width - w);
    }
    if (y < 0.0 || y + h > cfg.frame_height) {
      vy = -vy;
      y = std::clamp(y, 0.0, cfg.frame_height - h);
    }
  }
  return t;
}

bool Overlaps(const Trajectory& a, const Trajectory& b) {
  for (size_t k = 0; k < a.boxes.size(); ++k) {
    const Box* other = b.At(a.first + static_cast<int>(k));
    if (other && Iou(a.boxes[k], *other) > kMaxTubeOverlap) return true;
  }
  return false;
}

const FrameBox* FindFrame(const std::vector<FrameBox>& v, int frame) {
  for (const auto& fb : v) {
    if (fb.frame == frame) return &fb;
  }
  return nullptr;
}

// Distractor entry of `tube` at `frame` if it lies within `pad` frames of
// the true extent.
const FrameBox* DistractorAt(const WorldTube& tube, int frame, int pad) {
  const int start = tube.gt.elements.front().frame;
  const int end = tube.gt.elements.back().frame;
  if (frame < start && start - frame <= pad) return FindFrame(tube.before, frame);
  if (frame > end && frame - end <= pad) return FindFrame(tube.after, frame);
  return nullptr;
}

const FrameBox* GroundTruthAt(const WorldTube& tube, int frame) {
  const int start = tube.gt.elements.front().frame;
  const int k = frame - start;
  if (k < 0 || k >= static_cast<int>(tube.gt.elements.size())) return nullptr;
  return &tube.gt.elements[k];
}

FeatureMap Downsample(const FeatureMap& in) {
  const int h = (in.height() + 1) / 2;
  const int w = (in.width() + 1) / 2;
  FeatureMap out(in.channels(), h, w);
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        int n = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int yy = 2 * y + dy;
            const int xx = 2 * x + dx;
            if (yy < in.height() && xx < in.width()) {
              sum += in.at(c, yy, xx);
              ++n;
            }
          }
        }
        out.at(c, y, x) = sum / n;
      }
    }
  }
  return out;
}

std::vector<double> Descriptor(const HeadFeatures& hf, const Box& box,
                               const MessageParams& message) {
  const RoiFeature rgb = RoiPool(hf.pyramids.rgb.at(2), box, hf.roi);
  const RoiFeature flow = RoiPool(hf.pyramids.flow.at(2), box, hf.roi);
  return ChannelMeans(FuseRoi(rgb, flow, message).map());
}

SeedResult EvaluateSeed(const ScenarioConfig& cfg, const SyntheticWorld& world,
                        const std::vector<VideoStageResult>& results,
                        WorldRun* run = nullptr) {
  SeedResult r;
  r.seed = world.seed;
  const int stages = cfg.cooperation.num_stages;
  const auto gt_tubes = GroundTruth(world);
  const auto gt_boxes = FlattenGroundTruth(gt_tubes);
  for (int t = 0; t <= stages; ++t) {
    std::vector<FrameDetection> dets;
    for (size_t v = 0; v < world.videos.size(); ++v) {
      auto d = StageDetections(world.videos[v].id, results[v], t);
      dets.insert(dets.end(), d.begin(), d.end());
    }
    r.stage_frame_map.push_back(FrameMap(dets, gt_boxes, 0.5).map);
    r.stage_coverage.push_back(GroundTruthCoverage(dets, gt_boxes));
  }

  std::vector<std::vector<ActionnessSample>> samples(cfg.num_classes);
  std::vector<ActionTube> before;
  std::vector<std::vector<std::vector<double>>> before_desc;
  for (size_t v = 0; v < world.videos.size(); ++v) {
    const auto& video = world.videos[v];
    std::vector<std::vector<std::vector<double>>> desc;
    auto tubes = LinkVideo(video.id, results[v], cfg.num_classes, cfg.link, &desc);
    if (run) {
      for (size_t i = 0; i < tubes.size(); ++i) {
        run->tubes.push_back(tubes[i]);
        run->descriptors.push_back(desc[i]);
        run->tube_is_train.push_back(video.train);
      }
    }
    if (video.train) {
      FrameGroundTruth frame_gt;
      for (const auto& t : video.tubes) {
        for (const auto& e : t.gt.elements) {
          frame_gt[e.frame].push_back({e.box, t.gt.class_id});
        }
      }
      for (size_t i = 0; i < tubes.size(); ++i) {
        auto s = BuildTrainingSet(
            std::span(&tubes[i], 1), tubes[i].class_id, frame_gt,
            [&](const ActionTube&, size_t e) { return desc[i][e]; });
        auto& dst = samples[tubes[i].class_id];
        dst.insert(dst.end(), s.begin(), s.end());
      }
    } else {
      for (size_t i = 0; i < tubes.size(); ++i) {
        before.push_back(std::move(tubes[i]));
        before_desc.push_back(std::move(desc[i]));
      }
    }
  }

  TrainParams train = cfg.train;
  train.seed = MixSeed({world.seed, 5});
  const ActionnessClassifier clf = TrainActionness(samples, train);
  for (const auto& s : clf.scorers()) r.degenerate_classes += s.degenerate ? 1 : 0;
  if (run) run->classifier = clf;

  std::vector<ActionTube> after;
  for (size_t i = 0; i < before.size(); ++i) {
    auto refined = RefineTube(before[i], clf, before_desc[i], cfg.refine);
    after.insert(after.end(), refined.begin(), refined.end());
  }
  const auto test_gt = GroundTruth(world, false, true);
  r.video_map_before = VideoMap(before, test_gt, 0.5).map;
  r.video_map_after = VideoMap(after, test_gt, 0.5).map;
  return r;
}

}  // namespace

void ScenarioConfig::Validate() const {
  Require(num_videos >= 1, "scenario.num_videos", "must be >= 1");
  Require(frames_per_video >= 1, "scenario.frames_per_video", "must be >= 1");
  Require(num_classes >= 1, "scenario.num_classes", "must be >= 1");
  Require(tubes_per_video >= 0, "scenario.tubes_per_video", "must be >= 0");
  Require(frame_width > 0.0, "scenario.frame_width", "must be > 0");
  Require(frame_height > 0.0, "scenario.frame_height", "must be > 0");
  Require(min_box > 0.0 && min_box <= max_box, "scenario.min_box",
          "must be > 0 and <= scenario.max_box");
  Require(max_box <= std::min(frame_width, frame_height), "scenario.max_box",
          "boxes larger than the frame are infeasible");
  Require(min_tube_len >= 1 && min_tube_len <= max_tube_len,
          "scenario.min_tube_len", "must be >= 1 and <= scenario.max_tube_len");
  Require(max_tube_len <= frames_per_video, "scenario.max_tube_len",
          "must not exceed scenario.frames_per_video");
  Require(max_speed >= 0.0, "scenario.max_speed", "must be >= 0");
  Require(proposals_per_object >= 1, "scenario.proposals_per_object",
          "must be >= 1");
  Require(complementarity >= 0.0 && complementarity <= 1.0,
          "scenario.complementarity", "must lie in [0, 1]");
  Require(num_seeds >= 1, "scenario.num_seeds", "must be >= 1");
  Require(train_fraction >= 0.0 && train_fraction <= 1.0,
          "scenario.train_fraction", "must lie in [0, 1]");
  for (StreamId s : {StreamId::kRgb, StreamId::kFlow}) {
    const std::string sec(StreamName(s));
    const StreamNoise& n = stream(s);
    Require(n.miss_prob >= 0.0 && n.miss_prob <= 1.0, sec + ".miss_prob",
            "must lie in [0, 1]");
    Require(n.jitter_sigma >= 0.0, sec + ".jitter_sigma", "must be >= 0");
    Require(n.fp_rate >= 0.0, sec + ".fp_rate", "must be >= 0");
    Require(n.boundary_pad >= 0, sec + ".boundary_pad", "must be >= 0");
  }
  Require(rgb.miss_prob * (1.0 - complementarity) + flow.miss_prob <= 1.0 + 1e-12,
          "scenario.complementarity",
          "miss probabilities too large for the requested overlap");
  Require(head.regression_fraction >= 0.0 && head.regression_fraction <= 1.0,
          "head.regression_fraction", "must lie in [0, 1]");
  Require(head.jitter_sigma >= 0.0, "head.jitter_sigma", "must be >= 0");
  Require(head.score_noise >= 0.0, "head.score_noise", "must be >= 0");
  Require(head.feature_weight >= 0.0 && head.feature_weight <= 1.0,
          "head.feature_weight", "must lie in [0, 1]");
  Require(head.distractor_factor >= 0.0 && head.distractor_factor <= 1.0,
          "head.distractor_factor", "must lie in [0, 1]");
  Require(features.channels >= 2, "features.channels", "must be >= 2");
  Require(features.reduction >= 1 &&
              features.channels % features.reduction == 0 &&
              features.channels / features.reduction >= 2,
          "features.reduction",
          "must divide features.channels leaving at least 2 hidden channels");
  Require(features.stride >= 1, "features.stride", "must be >= 1");
  Require(features.noise >= 0.0, "features.noise", "must be >= 0");
  Require(features.roi_size >= 1, "features.roi_size", "must be >= 1");
  cooperation.Validate();
  link.Validate();
  refine.Validate();
  Require(train.epochs >= 0, "refine.epochs", "must be >= 0");
  Require(train.learning_rate > 0.0, "refine.learning_rate", "must be > 0");
}

SyntheticWorld GenerateWorld(const ScenarioConfig& cfg, uint64_t seed) {
  cfg.Validate();
  SyntheticWorld world;
  world.seed = seed;
  world.num_classes = cfg.num_classes;
  world.frames_per_video = cfg.frames_per_video;
  world.frame_width = cfg.frame_width;
  world.frame_height = cfg.frame_height;

  const int num_train =
      static_cast<int>(std::lround(cfg.num_videos * cfg.train_fraction));
  const int pad_max = std::max(cfg.rgb.boundary_pad, cfg.flow.boundary_pad);
  const int frames = cfg.frames_per_video;

  for (int v = 0; v < cfg.num_videos; ++v) {
    VideoWorld video;
    video.id = fmt::format("v{:03d}", v);
    video.train = v < num_train;
    std::mt19937_64 rng(MixSeed({seed, 1, static_cast<uint64_t>(v)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> ulen(cfg.min_tube_len, cfg.max_tube_len);
    std::uniform_int_distribution<int> ucls(0, cfg.num_classes - 1);
    std::uniform_real_distribution<double> usize(cfg.min_box, cfg.max_box);

    std::vector<Trajectory> placed;
    for (int k = 0; k < cfg.tubes_per_video; ++k) {
      Trajectory traj;
      int start = 0;
      int len = 0;
      int cls = 0;
      for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
        len = ulen(rng);
        start = std::uniform_int_distribution<int>(0, frames - len)(rng);
        cls = ucls(rng);
        const double w = usize(rng);
        const double h = usize(rng);
        const int first = std::max(0, start - pad_max);
        const int last = std::min(frames - 1, start + len - 1 + pad_max);
        traj = MakeTrajectory(first, last, w, h, cfg, rng);
        bool clash = false;
        for (const auto& other : placed) clash = clash || Overlaps(traj, other);
        if (!clash) break;
      }
      WorldTube tube;
      tube.gt.video_id = video.id;
      tube.gt.class_id = cls;
      for (int f = traj.first; f < traj.first + static_cast<int>(traj.boxes.size()); ++f) {
        const FrameBox fb{f, *traj.At(f)};
        if (f < start) {
          tube.before.push_back(fb);
        } else if (f >= start + len) {
          tube.after.push_back(fb);
        } else {
          tube.gt.elements.push_back(fb);
        }
      }
      const double u = unit(rng);
      const double flow_start = cfg.rgb.miss_prob * (1.0 - cfg.complementarity);
      tube.missed[Index(StreamId::kRgb)] = u < cfg.rgb.miss_prob;
      tube.missed[Index(StreamId::kFlow)] =
          u >= flow_start && u < flow_start + cfg.flow.miss_prob;
      tube.pad[Index(StreamId::kRgb)] = cfg.rgb.boundary_pad;
      tube.pad[Index(StreamId::kFlow)] = cfg.flow.boundary_pad;
      placed.push_back(std::move(traj));
      video.tubes.push_back(std::move(tube));
    }

    video.proposals.resize(frames);
    for (StreamId s : {StreamId::kRgb, StreamId::kFlow}) {
      const StreamNoise& noise = cfg.stream(s);
      std::mt19937_64 prng(
          MixSeed({seed, 2, static_cast<uint64_t>(v), static_cast<uint64_t>(Index(s))}));
      std::poisson_distribution<int> nfp(noise.fp_rate);
      std::uniform_real_distribution<double> uscore(0.0, 0.3);
      for (int f = 0; f < frames; ++f) {
        auto& out = video.proposals[f][Index(s)];
        for (const auto& obj : VisibleObjects(video, f, s)) {
          for (int j = 0; j < cfg.proposals_per_object; ++j) {
            Box b = noise.jitter_sigma > 0.0 ? Jitter(obj.box, noise.jitter_sigma, prng)
                                             : obj.box;
            b = Clip(b, cfg.frame_width, cfg.frame_height);
            out.push_back({b, obj.class_id, Iou(b, obj.box)});
          }
        }
        const int spurious = noise.fp_rate > 0.0 ? nfp(prng) : 0;
        for (int j = 0; j < spurious; ++j) {
          const double w = usize(prng);
          const double h = usize(prng);
          const double x = std::uniform_real_distribution<double>(0.0, cfg.frame_width - w)(prng);
          const double y = std::uniform_real_distribution<double>(0.0, cfg.frame_height - h)(prng);
          out.push_back({{x, y, x + w, y + h}, ucls(prng), uscore(prng)});
        }
      }
    }
    world.videos.push_back(std::move(video));
  }
  return world;
}

std::vector<WorldObject> FrameObjects(const VideoWorld& video, int frame) {
  std::vector<WorldObject> out;
  for (int k = 0; k < static_cast<int>(video.tubes.size()); ++k) {
    const auto& t = video.tubes[k];
    if (const FrameBox* g = GroundTruthAt(t, frame)) {
      out.push_back({g->box, t.gt.class_id, k, true});
    } else if (const FrameBox* d = DistractorAt(t, frame, std::max(t.pad[0], t.pad[1]))) {
      out.push_back({d->box, t.gt.class_id, k, false});
    }
  }
  return out;
}

std::vector<WorldObject> VisibleObjects(const VideoWorld& video, int frame,
                                        StreamId stream) {
  std::vector<WorldObject> out;
  for (int k = 0; k < static_cast<int>(video.tubes.size()); ++k) {
    const auto& t = video.tubes[k];
    if (t.missed[Index(stream)]) continue;
    if (const FrameBox* g = GroundTruthAt(t, frame)) {
      out.push_back({g->box, t.gt.class_id, k, true});
    } else if (const FrameBox* d = DistractorAt(t, frame, t.pad[Index(stream)])) {
      out.push_back({d->box, t.gt.class_id, k, false});
    }
  }
  return out;
}

std::vector<GroundTruthTube> GroundTruth(const SyntheticWorld& world,
                                         bool include_train,
                                         bool include_test) {
  std::vector<GroundTruthTube> out;
  for (const auto& v : world.videos) {
    if ((v.train && !include_train) || (!v.train && !include_test)) continue;
    for (const auto& t : v.tubes) out.push_back(t.gt);
  }
  return out;
}

FeaturePyramid RenderPyramid(const SyntheticWorld& world, int video, int frame,
                             StreamId stream, const FeatureConfig& cfg) {
  const int stride = cfg.stride;
  const int h = static_cast<int>(std::ceil(world.frame_height / stride));
  const int w = static_cast<int>(std::ceil(world.frame_width / stride));
  FeatureMap base(cfg.channels, h, w, 0.0);
  for (const auto& obj : VisibleObjects(world.videos[video], frame, stream)) {
    const int y0 = std::max(0, static_cast<int>(std::floor(obj.box.y1 / stride - 0.5)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(obj.box.y2 / stride)));
    const int x0 = std::max(0, static_cast<int>(std::floor(obj.box.x1 / stride - 0.5)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(obj.box.x2 / stride)));
    for (int y = y0; y <= y1; ++y) {
      const double cy = (y + 0.5) * stride;
      if (cy < obj.box.y1 || cy > obj.box.y2) continue;
      for (int x = x0; x <= x1; ++x) {
        const double cx = (x + 0.5) * stride;
        if (cx < obj.box.x1 || cx > obj.box.x2) continue;
        if (obj.action) base.at(0, y, x) = 1.0;
        base.at(1, y, x) = 1.0;
      }
    }
  }
  if (cfg.noise > 0.0) {
    std::mt19937_64 rng(MixSeed({world.seed, 3, static_cast<uint64_t>(video),
                                 static_cast<uint64_t>(frame),
                                 static_cast<uint64_t>(Index(stream))}));
    std::normal_distribution<double> n(0.0, cfg.noise);
    for (auto& v : base.data()) v += n(rng);
  }
  FeaturePyramid pyramid;
  pyramid.emplace(2, std::move(base));
  for (int level = 3; level <= 5; ++level) {
    pyramid.emplace(level, Downsample(pyramid.at(level - 1)));
  }
  return pyramid;
}

MessageParams HarnessMessageParams(const FeatureConfig& cfg) {
  MessageParams p = MessageParams::Zero(cfg.channels, cfg.reduction);
  const int c = p.channels;
  const int hidden = p.hidden();
  if (hidden < 2) {
    throw ValidationError("harness message needs at least 2 hidden channels");
  }
  for (int k = 0; k < 2; ++k) {
    p.w1[k * c + k] = 1.0;
    p.w2[k * hidden + k] = cfg.message_gain;
  }
  return p;
}

SimulatedHead::SimulatedHead(std::vector<WorldObject> objects, HeadNoise noise,
                             double nms_threshold, double frame_width,
                             double frame_height, uint64_t seed,
                             const HeadFeatures* features)
    : objects_(std::move(objects)),
      noise_(noise),
      nms_threshold_(nms_threshold),
      width_(frame_width),
      height_(frame_height),
      seed_(seed),
      features_(features) {}

double SimulatedHead::Evidence(const Box& box, StreamId stream,
                               int stage) const {
  const auto& own_map = stream == StreamId::kRgb ? features_->pyramids.rgb
                                                 : features_->pyramids.flow;
  RoiFeature own = RoiPool(own_map.at(2), box, features_->roi);
  if (features_->cooperate && stage >= 1) {
    const StreamId source = RoiMessageSource(stage);
    const auto& src_map = source == StreamId::kRgb ? features_->pyramids.rgb
                                                   : features_->pyramids.flow;
    const RoiFeature src = RoiPool(src_map.at(2), box, features_->roi);
    const auto& params = features_->roi_params.at(
        std::min<size_t>(stage, features_->roi_params.size() - 1));
    own = FuseRoi(own, src, params);
  }
  return std::clamp(ChannelMeans(own.map())[1], 0.0, 1.0);
}

DetectionSet SimulatedHead::Detect(const ProposalSet& proposals) const {
  std::mt19937_64 rng(MixSeed({seed_, static_cast<uint64_t>(Index(proposals.stream)),
                               static_cast<uint64_t>(proposals.stage)}));
  std::normal_distribution<double> n(0.0, 1.0);
  const double f = noise_.regression_fraction;
  std::vector<ScoredBox> out;
  out.reserve(proposals.proposals.size());
  for (const auto& p : proposals.proposals) {
    int best = -1;
    double best_iou = 0.0;
    for (int k = 0; k < static_cast<int>(objects_.size()); ++k) {
      const double v = Iou(p.box, objects_[k].box);
      if (v > best_iou) {
        best_iou = v;
        best = k;
      }
    }
    Box b = p.box;
    if (best >= 0) {
      const Box& o = objects_[best].box;
      b = {b.x1 + f * (o.x1 - b.x1), b.y1 + f * (o.y1 - b.y1),
           b.x2 + f * (o.x2 - b.x2), b.y2 + f * (o.y2 - b.y2)};
    }
    double noise[5];
    for (double& z : noise) z = n(rng);
    const double js = noise_.jitter_sigma;
    b = Ordered({b.x1 + js * noise[0], b.y1 + js * noise[1], b.x2 + js * noise[2],
                 b.y2 + js * noise[3]});
    b = Clip(b, width_, height_);

    const double iou = best >= 0 ? Iou(b, objects_[best].box) : 0.0;
    double raw = iou;
    if (features_) {
      const double w = noise_.feature_weight;
      raw = (1.0 - w) * iou + w * Evidence(b, proposals.stream, proposals.stage);
    }
    if (best >= 0 && !objects_[best].action) raw *= noise_.distractor_factor;
    const double eps = std::clamp(noise_.score_noise * noise[4], -0.5, 0.5);
    // The head classifies as well as regresses: a proposal overlapping an
    // object takes that object's class.
    const int cls = best >= 0 ? objects_[best].class_id : p.class_id;
    out.push_back({b, cls, std::clamp(raw * (1.0 + eps), 0.0, 1.0)});
  }
  return {proposals.stream, proposals.stage, Nms(out, nms_threshold_)};
}

VideoStageResult RunVideoStages(const SyntheticWorld& world, int video,
                                const ScenarioConfig& cfg) {
  const auto& vw = world.videos.at(video);
  const int stages = cfg.cooperation.num_stages;
  const int frames = static_cast<int>(vw.proposals.size());
  const MessageParams message = HarnessMessageParams(cfg.features);
  PyramidParams image_params;
  for (int level : kPyramidLevels) image_params[level] = message;

  VideoStageResult result;
  result.combined.assign(stages + 1, std::vector<std::vector<ScoredBox>>(frames));
  result.descriptors.resize(frames);

  for (int f = 0; f < frames; ++f) {
    HeadFeatures hf;
    hf.pyramids.rgb = RenderPyramid(world, video, f, StreamId::kRgb, cfg.features);
    hf.pyramids.flow = RenderPyramid(world, video, f, StreamId::kFlow, cfg.features);
    hf.roi.output_size = cfg.features.roi_size;
    hf.roi.spatial_scale = 1.0 / cfg.features.stride;
    hf.cooperate = cfg.feature_cooperation;
    if (cfg.feature_cooperation) ApplyImageLevelPass(hf.pyramids, image_params);
    // Per-stage ROI message modules; a single shared entry when requested.
    hf.roi_params.assign(cfg.features.share_roi_params ? 1 : stages + 1, message);

    SimulatedHead head(FrameObjects(vw, f), cfg.head,
                       cfg.cooperation.nms_standard, world.frame_width,
                       world.frame_height,
                       MixSeed({world.seed, 4, static_cast<uint64_t>(video),
                                static_cast<uint64_t>(f)}),
                       &hf);
    ProposalSet rgb{StreamId::kRgb, 0, vw.proposals[f][Index(StreamId::kRgb)]};
    ProposalSet flow{StreamId::kFlow, 0, vw.proposals[f][Index(StreamId::kFlow)]};
    StageState state =
        InitStageState(rgb, flow, head, world.frame_width, world.frame_height);
    state = RunStages(std::move(state), head, cfg.cooperation);
    for (int t = 0; t <= stages; ++t) {
      result.combined[t][f] = CombineOutputs(state, t, cfg.cooperation);
    }
    for (const auto& d : result.combined[stages][f]) {
      result.descriptors[f].push_back(Descriptor(hf, d.box, message));
    }
  }
  return result;
}

std::vector<ActionTube> LinkVideo(
    const std::string& video_id, const VideoStageResult& stages,
    int num_classes, const LinkParams& params,
    std::vector<std::vector<std::vector<double>>>* descriptors) {
  const auto& last = stages.combined.back();
  std::vector<FrameDetections> frames;
  for (int f = 0; f < static_cast<int>(last.size()); ++f) {
    frames.push_back({f, last[f]});
  }
  std::vector<ActionTube> tubes;
  for (int c = 0; c < num_classes; ++c) {
    for (auto& t : LinkTubes(frames, c, params)) {
      t.video_id = video_id;
      if (descriptors) {
        std::vector<std::vector<double>> d;
        for (const auto& e : t.elements) {
          d.push_back(stages.descriptors.at(e.frame).at(e.det_index));
        }
        descriptors->push_back(std::move(d));
      }
      tubes.push_back(std::move(t));
    }
  }
  return tubes;
}

std::vector<FrameDetection> StageDetections(const std::string& video_id,
                                            const VideoStageResult& stages,
                                            int stage) {
  std::vector<FrameDetection> out;
  const auto& frames = stages.combined.at(stage);
  for (int f = 0; f < static_cast<int>(frames.size()); ++f) {
    for (const auto& d : frames[f]) out.push_back({video_id, f, d});
  }
  return out;
}

double GroundTruthCoverage(std::span<const FrameDetection> dets,
                           std::span<const GroundTruthBox> gt) {
  if (gt.empty()) return 1.0;
  std::map<std::pair<std::string, int>, std::vector<const Box*>> by_frame;
  for (const auto& d : dets) by_frame[{d.video_id, d.frame}].push_back(&d.det.box);
  int covered = 0;
  for (const auto& g : gt) {
    auto it = by_frame.find({g.video_id, g.frame});
    if (it == by_frame.end()) continue;
    for (const Box* b : it->second) {
      if (Iou(*b, g.gt.box) > 0.5) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / gt.size();
}

SeedResult RunSeed(const ScenarioConfig& cfg, uint64_t seed) {
  const SyntheticWorld world = GenerateWorld(cfg, seed);
  std::vector<VideoStageResult> results;
  for (int v = 0; v < static_cast<int>(world.videos.size()); ++v) {
    results.push_back(RunVideoStages(world, v, cfg));
  }
  return EvaluateSeed(cfg, world, results);
}

WorldRun RunWorld(const ScenarioConfig& cfg, const SyntheticWorld& world) {
  cfg.Validate();
  if (world.num_classes != cfg.num_classes) {
    throw ValidationError(fmt::format(
        "scenario.num_classes: config has {} classes but the world has {}",
        cfg.num_classes, world.num_classes));
  }
  WorldRun run;
  const int videos = static_cast<int>(world.videos.size());
  run.videos.resize(videos);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < videos; ++v) {
    run.videos[v] = RunVideoStages(world, v, cfg);
  }
  run.metrics = EvaluateSeed(cfg, world, run.videos, &run);
  return run;
}

ExperimentResult RunExperiment(const ScenarioConfig& cfg) {
  cfg.Validate();
  const int seeds = cfg.num_seeds;
  std::vector<SyntheticWorld> worlds(seeds);

#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < seeds; ++k) {
    worlds[k] = GenerateWorld(cfg, cfg.seed + k);
  }

  const int videos = cfg.num_videos;
  std::vector<std::vector<VideoStageResult>> results(
      seeds, std::vector<VideoStageResult>(videos));
#pragma omp parallel for schedule(dynamic)
  for (int item = 0; item < seeds * videos; ++item) {
    const int k = item / videos;
    const int v = item % videos;
    results[k][v] = RunVideoStages(worlds[k], v, cfg);
  }

  ExperimentResult out;
  out.seeds.resize(seeds);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < seeds; ++k) {
    out.seeds[k] = EvaluateSeed(cfg, worlds[k], results[k]);
  }

  out.mean_stage_frame_map.assign(cfg.cooperation.num_stages + 1, 0.0);
  for (const auto& s : out.seeds) {
    for (size_t t = 0; t < s.stage_frame_map.size(); ++t) {
      out.mean_stage_frame_map[t] += s.stage_frame_map[t] / seeds;
    }
    out.mean_video_map_before += s.video_map_before / seeds;
    out.mean_video_map_after += s.video_map_after / seeds;
  }
  return out;
}

}  // namespace pcsc
