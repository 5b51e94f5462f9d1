// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Interchange formats. All emitted real numbers are rounded to 6
// significant digits and fields are written in a fixed order, so output
// bytes depend only on the input values.
//
// DetectionRecord (one JSON object per line):
//   {"video_id":"v000","frame":3,"class":1,"box":[x1,y1,x2,y2],"score":0.9,
//    "stream":"rgb","stage":0}        stream and stage are optional
// TubeRecord:
//   {"video_id":"v000","class":1,"score":0.8,
//    "elements":[{"frame":3,"box":[...],"score":0.8},...]}
// Ground-truth tubes use the TubeRecord layout without score fields.
// Tube features (aligned with a tube file by line index):
//   {"tube":0,"features":[[...],...]}   or   {"tube":0,"actionness":[...]}
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcsc/eval.h"
#include "pcsc/fusion.h"
#include "pcsc/harness.h"
#include "pcsc/refine.h"
#include "pcsc/tubes.h"

namespace pcsc {

double Round6(double v);
// "{:.6g}"
std::string FormatReal(double v);

struct DetectionRecord {
  std::string video_id;
  int frame = 0;
  ScoredBox det;
  std::optional<StreamId> stream;
  std::optional<int> stage;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

// Parse functions throw ValidationError prefixed with `context`
// (typically "file:line").
std::string DetectionToJson(const DetectionRecord& r);
DetectionRecord ParseDetection(const std::string& line,
                               const std::string& context = "<input>");
std::string TubeToJson(const ActionTube& t);
ActionTube ParseTube(const std::string& line,
                     const std::string& context = "<input>");
std::string GroundTruthToJson(const GroundTruthTube& t);
GroundTruthTube ParseGroundTruth(const std::string& line,
                                 const std::string& context = "<input>");

struct TubeFeatures {
  int tube = 0;
  std::vector<std::vector<double>> features;  // per element descriptors
  std::vector<double> actionness;             // per element scores
};
std::string TubeFeaturesToJson(const TubeFeatures& f);
TubeFeatures ParseTubeFeatures(const std::string& line,
                               const std::string& context = "<input>");

std::vector<DetectionRecord> ReadDetections(const std::string& path);
std::vector<ActionTube> ReadTubes(const std::string& path);
std::vector<GroundTruthTube> ReadGroundTruth(const std::string& path);
std::vector<TubeFeatures> ReadTubeFeatures(const std::string& path);

// Writes one JSON line per item; creates parent directories.
void WriteLines(const std::string& path, const std::vector<std::string>& lines);
void WriteText(const std::string& path, const std::string& text);

// Weight file:
//   {"format":"pcsc-weights","version":1,
//    "message":{"channels":C,"reduction":r,"hidden":h,
//               "w1":[h*C row-major],"b1":[h],"w2":[C*h row-major],"b2":[C]},
//    "actionness":[{"class":0,"weights":[...],"bias":b,
//                   "degenerate":false,"base_rate":p},...]}
struct WeightFile {
  std::optional<MessageParams> message;
  ActionnessClassifier actionness;
};
std::string WeightsToJson(const WeightFile& w);
WeightFile ParseWeights(const std::string& text,
                        const std::string& context = "<weights>");
WeightFile ReadWeights(const std::string& path);

// World directory: manifest.json, gt_tubes.jsonl, distractors.jsonl,
// proposals_rgb.jsonl, proposals_flow.jsonl.
void WriteWorld(const std::string& dir, const SyntheticWorld& world,
                const ScenarioConfig& cfg);
SyntheticWorld ReadWorld(const std::string& dir);

}  // namespace pcsc
