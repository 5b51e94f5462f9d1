// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/io.h"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "pcsc/config.h"
#include "pcsc/error.h"

namespace pcsc {
namespace {

using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void Fail(const std::string& context, const std::string& what) {
  throw ValidationError(fmt::format("{}: {}", context, what));
}

const Json& Field(const Json& j, const char* key, const std::string& context) {
  if (!j.is_object()) Fail(context, "expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) Fail(context, fmt::format("missing field '{}'", key));
  return *it;
}

double Real(const Json& j, const char* key, const std::string& context) {
  const Json& v = Field(j, key, context);
  if (!v.is_number()) Fail(context, fmt::format("field '{}' must be a number", key));
  return v.get<double>();
}

int Int(const Json& j, const char* key, const std::string& context) {
  const Json& v = Field(j, key, context);
  if (!v.is_number_integer()) {
    Fail(context, fmt::format("field '{}' must be an integer", key));
  }
  return v.get<int>();
}

std::string Str(const Json& j, const char* key, const std::string& context) {
  const Json& v = Field(j, key, context);
  if (!v.is_string()) Fail(context, fmt::format("field '{}' must be a string", key));
  return v.get<std::string>();
}

std::vector<double> Reals(const Json& v, const std::string& context,
                          const char* what) {
  if (!v.is_array()) Fail(context, fmt::format("'{}' must be an array", what));
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) Fail(context, fmt::format("'{}' must hold numbers", what));
    out.push_back(x.get<double>());
  }
  return out;
}

Box ParseBox(const Json& j, const std::string& context) {
  const auto v = Reals(Field(j, "box", context), context, "box");
  if (v.size() != 4) Fail(context, "box must have 4 coordinates");
  Box b{v[0], v[1], v[2], v[3]};
  if (!b.Valid()) Fail(context, "box must satisfy x1 <= x2 and y1 <= y2");
  return b;
}

double ParseScore(const Json& j, const std::string& context) {
  const double s = Real(j, "score", context);
  if (!(s >= 0.0 && s <= 1.0)) Fail(context, "score must lie in [0, 1]");
  return s;
}

OJson BoxJson(const Box& b) {
  return OJson::array({Round6(b.x1), Round6(b.y1), Round6(b.x2), Round6(b.y2)});
}

OJson RealsJson(const std::vector<double>& v) {
  OJson a = OJson::array();
  for (double x : v) a.push_back(Round6(x));
  return a;
}

Json ParseLine(const std::string& line, const std::string& context) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    Fail(context, fmt::format("malformed JSON ({})", e.what()));
  }
}

template <typename T, typename ParseFn>
std::vector<T> ReadJsonl(const std::string& path, ParseFn parse) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path));
  std::vector<T> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse(line, fmt::format("{}:{}", path, n)));
  }
  return out;
}

std::vector<FrameBox> ParseFrameBoxes(const Json& arr, const std::string& context,
                                      std::vector<double>* scores) {
  if (!arr.is_array()) Fail(context, "'elements' must be an array");
  std::vector<FrameBox> out;
  int prev = -1;
  for (const auto& e : arr) {
    FrameBox fb{Int(e, "frame", context), ParseBox(e, context)};
    if (fb.frame <= prev) Fail(context, "element frames must be strictly increasing");
    prev = fb.frame;
    if (scores) scores->push_back(ParseScore(e, context));
    out.push_back(fb);
  }
  return out;
}

OJson MessageJson(const MessageParams& p) {
  OJson j;
  j["channels"] = p.channels;
  j["reduction"] = p.reduction;
  j["hidden"] = p.hidden();
  j["w1"] = RealsJson(p.w1);
  j["b1"] = RealsJson(p.b1);
  j["w2"] = RealsJson(p.w2);
  j["b2"] = RealsJson(p.b2);
  return j;
}

}  // namespace

double Round6(double v) {
  if (!std::isfinite(v)) {
    throw StructuralError("non-finite value cannot be serialized");
  }
  return std::strtod(FormatReal(v).c_str(), nullptr);
}

std::string FormatReal(double v) { return fmt::format("{:.6g}", v); }

std::string DetectionToJson(const DetectionRecord& r) {
  OJson j;
  j["video_id"] = r.video_id;
  j["frame"] = r.frame;
  j["class"] = r.det.class_id;
  j["box"] = BoxJson(r.det.box);
  j["score"] = Round6(r.det.score);
  if (r.stream) j["stream"] = std::string(StreamName(*r.stream));
  if (r.stage) j["stage"] = *r.stage;
  return j.dump();
}

DetectionRecord ParseDetection(const std::string& line,
                               const std::string& context) {
  const Json j = ParseLine(line, context);
  DetectionRecord r;
  r.video_id = Str(j, "video_id", context);
  r.frame = Int(j, "frame", context);
  if (r.frame < 0) Fail(context, "frame must be >= 0");
  r.det.class_id = Int(j, "class", context);
  if (r.det.class_id < 0) Fail(context, "class must be >= 0");
  r.det.box = ParseBox(j, context);
  r.det.score = ParseScore(j, context);
  if (j.contains("stream")) {
    try {
      r.stream = ParseStream(Str(j, "stream", context));
    } catch (const ValidationError& e) {
      Fail(context, e.what());
    }
  }
  if (j.contains("stage")) r.stage = Int(j, "stage", context);
  return r;
}

std::string TubeToJson(const ActionTube& t) {
  OJson j;
  j["video_id"] = t.video_id;
  j["class"] = t.class_id;
  j["score"] = Round6(t.score);
  OJson elems = OJson::array();
  for (const auto& e : t.elements) {
    OJson ej;
    ej["frame"] = e.frame;
    ej["box"] = BoxJson(e.box);
    ej["score"] = Round6(e.score);
    elems.push_back(std::move(ej));
  }
  j["elements"] = std::move(elems);
  return j.dump();
}

ActionTube ParseTube(const std::string& line, const std::string& context) {
  const Json j = ParseLine(line, context);
  ActionTube t;
  t.video_id = Str(j, "video_id", context);
  t.class_id = Int(j, "class", context);
  t.score = ParseScore(j, context);
  std::vector<double> scores;
  const auto boxes = ParseFrameBoxes(Field(j, "elements", context), context, &scores);
  if (boxes.empty()) Fail(context, "tube must have at least one element");
  for (size_t i = 0; i < boxes.size(); ++i) {
    t.elements.push_back({boxes[i].frame, boxes[i].box, scores[i], -1});
  }
  return t;
}

std::string GroundTruthToJson(const GroundTruthTube& t) {
  OJson j;
  j["video_id"] = t.video_id;
  j["class"] = t.class_id;
  OJson elems = OJson::array();
  for (const auto& e : t.elements) {
    OJson ej;
    ej["frame"] = e.frame;
    ej["box"] = BoxJson(e.box);
    elems.push_back(std::move(ej));
  }
  j["elements"] = std::move(elems);
  return j.dump();
}

GroundTruthTube ParseGroundTruth(const std::string& line,
                                 const std::string& context) {
  const Json j = ParseLine(line, context);
  GroundTruthTube t;
  t.video_id = Str(j, "video_id", context);
  t.class_id = Int(j, "class", context);
  if (t.class_id < 0) Fail(context, "class must be >= 0");
  t.elements = ParseFrameBoxes(Field(j, "elements", context), context, nullptr);
  return t;
}

std::string TubeFeaturesToJson(const TubeFeatures& f) {
  OJson j;
  j["tube"] = f.tube;
  if (!f.features.empty()) {
    OJson rows = OJson::array();
    for (const auto& r : f.features) rows.push_back(RealsJson(r));
    j["features"] = std::move(rows);
  } else {
    j["actionness"] = RealsJson(f.actionness);
  }
  return j.dump();
}

TubeFeatures ParseTubeFeatures(const std::string& line,
                               const std::string& context) {
  const Json j = ParseLine(line, context);
  TubeFeatures f;
  f.tube = Int(j, "tube", context);
  if (j.contains("features")) {
    const Json& rows = j["features"];
    if (!rows.is_array()) Fail(context, "'features' must be an array of arrays");
    for (const auto& r : rows) f.features.push_back(Reals(r, context, "features"));
  } else if (j.contains("actionness")) {
    f.actionness = Reals(j["actionness"], context, "actionness");
    for (double a : f.actionness) {
      if (!(a >= 0.0 && a <= 1.0)) Fail(context, "actionness must lie in [0, 1]");
    }
  } else {
    Fail(context, "expected 'features' or 'actionness'");
  }
  return f;
}

std::vector<DetectionRecord> ReadDetections(const std::string& path) {
  return ReadJsonl<DetectionRecord>(path, ParseDetection);
}

std::vector<ActionTube> ReadTubes(const std::string& path) {
  return ReadJsonl<ActionTube>(path, ParseTube);
}

std::vector<GroundTruthTube> ReadGroundTruth(const std::string& path) {
  return ReadJsonl<GroundTruthTube>(path, ParseGroundTruth);
}

std::vector<TubeFeatures> ReadTubeFeatures(const std::string& path) {
  return ReadJsonl<TubeFeatures>(path, ParseTubeFeatures);
}

void WriteText(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path));
}

void WriteLines(const std::string& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) {
    text += l;
    text += '\n';
  }
  WriteText(path, text);
}

std::string WeightsToJson(const WeightFile& w) {
  OJson j;
  j["format"] = "pcsc-weights";
  j["version"] = 1;
  if (w.message) j["message"] = MessageJson(*w.message);
  OJson scorers = OJson::array();
  for (int c = 0; c < w.actionness.num_classes(); ++c) {
    const auto& s = w.actionness.scorer(c);
    OJson sj;
    sj["class"] = c;
    sj["weights"] = RealsJson(s.weights);
    sj["bias"] = Round6(s.bias);
    sj["degenerate"] = s.degenerate;
    sj["base_rate"] = Round6(s.base_rate);
    scorers.push_back(std::move(sj));
  }
  j["actionness"] = std::move(scorers);
  return j.dump(2) + "\n";
}

WeightFile ParseWeights(const std::string& text, const std::string& context) {
  const Json j = ParseLine(text, context);
  if (Str(j, "format", context) != "pcsc-weights") {
    Fail(context, "not a pcsc-weights file");
  }
  if (Int(j, "version", context) != 1) Fail(context, "unsupported version");
  WeightFile w;
  if (j.contains("message")) {
    const Json& m = j["message"];
    MessageParams p;
    p.channels = Int(m, "channels", context);
    p.reduction = Int(m, "reduction", context);
    p.w1 = Reals(Field(m, "w1", context), context, "w1");
    p.b1 = Reals(Field(m, "b1", context), context, "b1");
    p.w2 = Reals(Field(m, "w2", context), context, "w2");
    p.b2 = Reals(Field(m, "b2", context), context, "b2");
    try {
      p.Validate();
      if (Int(m, "hidden", context) != p.hidden()) {
        throw ValidationError("hidden does not equal channels / reduction");
      }
    } catch (const std::exception& e) {
      Fail(context, e.what());
    }
    w.message = std::move(p);
  }
  std::vector<LogisticScorer> scorers;
  const Json& arr = Field(j, "actionness", context);
  if (!arr.is_array()) Fail(context, "'actionness' must be an array");
  for (const auto& sj : arr) {
    if (Int(sj, "class", context) != static_cast<int>(scorers.size())) {
      Fail(context, "actionness scorers must be listed by class in order");
    }
    LogisticScorer s;
    s.weights = Reals(Field(sj, "weights", context), context, "weights");
    s.bias = Real(sj, "bias", context);
    const Json& deg = Field(sj, "degenerate", context);
    if (!deg.is_boolean()) Fail(context, "'degenerate' must be a boolean");
    s.degenerate = deg.get<bool>();
    s.base_rate = Real(sj, "base_rate", context);
    scorers.push_back(std::move(s));
  }
  w.actionness = ActionnessClassifier(std::move(scorers));
  return w;
}

WeightFile ReadWeights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseWeights(buf.str(), path);
}

void WriteWorld(const std::string& dir, const SyntheticWorld& world,
                const ScenarioConfig& cfg) {
  std::vector<std::string> gt;
  std::vector<std::string> distractors;
  std::vector<std::string> proposals[2];
  OJson videos = OJson::array();
  for (const auto& v : world.videos) {
    OJson vj;
    vj["id"] = v.id;
    vj["split"] = v.train ? "train" : "test";
    OJson tubes = OJson::array();
    for (size_t k = 0; k < v.tubes.size(); ++k) {
      const auto& t = v.tubes[k];
      gt.push_back(GroundTruthToJson(t.gt));
      for (const auto* part : {&t.before, &t.after}) {
        for (const auto& fb : *part) {
          OJson dj;
          dj["video_id"] = v.id;
          dj["tube"] = k;
          dj["frame"] = fb.frame;
          dj["box"] = BoxJson(fb.box);
          distractors.push_back(dj.dump());
        }
      }
      OJson tj;
      tj["rgb_missed"] = t.missed[0];
      tj["flow_missed"] = t.missed[1];
      tj["rgb_pad"] = t.pad[0];
      tj["flow_pad"] = t.pad[1];
      tubes.push_back(std::move(tj));
    }
    vj["tubes"] = std::move(tubes);
    videos.push_back(std::move(vj));
    for (int s = 0; s < 2; ++s) {
      for (size_t f = 0; f < v.proposals.size(); ++f) {
        for (const auto& p : v.proposals[f][s]) {
          proposals[s].push_back(DetectionToJson(
              {v.id, static_cast<int>(f), p, static_cast<StreamId>(s), 0}));
        }
      }
    }
  }
  OJson m;
  m["format"] = "pcsc-world";
  m["version"] = 1;
  m["seed"] = world.seed;
  m["config_hash"] = ConfigHash(cfg);
  m["num_classes"] = world.num_classes;
  m["frames_per_video"] = world.frames_per_video;
  m["frame_width"] = Round6(world.frame_width);
  m["frame_height"] = Round6(world.frame_height);
  m["videos"] = std::move(videos);
  m["files"] = {{"gt", "gt_tubes.jsonl"},
                {"distractors", "distractors.jsonl"},
                {"proposals_rgb", "proposals_rgb.jsonl"},
                {"proposals_flow", "proposals_flow.jsonl"}};

  const fs::path d(dir);
  WriteLines((d / "gt_tubes.jsonl").string(), gt);
  WriteLines((d / "distractors.jsonl").string(), distractors);
  WriteLines((d / "proposals_rgb.jsonl").string(), proposals[0]);
  WriteLines((d / "proposals_flow.jsonl").string(), proposals[1]);
  WriteText((d / "manifest.json").string(), m.dump(2) + "\n");
}

SyntheticWorld ReadWorld(const std::string& dir) {
  const fs::path d(dir);
  const std::string manifest_path = (d / "manifest.json").string();
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", manifest_path));
  std::stringstream buf;
  buf << in.rdbuf();
  const Json m = ParseLine(buf.str(), manifest_path);
  if (Str(m, "format", manifest_path) != "pcsc-world") {
    Fail(manifest_path, "not a pcsc-world manifest");
  }

  SyntheticWorld world;
  const Json& seed = Field(m, "seed", manifest_path);
  if (!seed.is_number_unsigned()) Fail(manifest_path, "seed must be unsigned");
  world.seed = seed.get<uint64_t>();
  world.num_classes = Int(m, "num_classes", manifest_path);
  world.frames_per_video = Int(m, "frames_per_video", manifest_path);
  world.frame_width = Real(m, "frame_width", manifest_path);
  world.frame_height = Real(m, "frame_height", manifest_path);
  if (world.num_classes <= 0 || world.frames_per_video <= 0 ||
      world.frame_width <= 0 || world.frame_height <= 0) {
    Fail(manifest_path, "world dimensions must be positive");
  }

  std::map<std::string, int> index;
  const Json& videos = Field(m, "videos", manifest_path);
  if (!videos.is_array()) Fail(manifest_path, "'videos' must be an array");
  for (const auto& vj : videos) {
    VideoWorld v;
    v.id = Str(vj, "id", manifest_path);
    v.train = Str(vj, "split", manifest_path) == "train";
    const Json& tubes = Field(vj, "tubes", manifest_path);
    if (!tubes.is_array()) Fail(manifest_path, "'tubes' must be an array");
    for (const auto& tj : tubes) {
      WorldTube t;
      t.missed = {Field(tj, "rgb_missed", manifest_path).get<bool>(),
                  Field(tj, "flow_missed", manifest_path).get<bool>()};
      t.pad = {Int(tj, "rgb_pad", manifest_path), Int(tj, "flow_pad", manifest_path)};
      v.tubes.push_back(std::move(t));
    }
    v.proposals.resize(world.frames_per_video);
    index[v.id] = static_cast<int>(world.videos.size());
    world.videos.push_back(std::move(v));
  }

  auto video_of = [&](const std::string& id, const std::string& context) -> VideoWorld& {
    auto it = index.find(id);
    if (it == index.end()) Fail(context, fmt::format("unknown video '{}'", id));
    return world.videos[it->second];
  };

  std::map<std::string, size_t> next_tube;
  const std::string gt_path = (d / "gt_tubes.jsonl").string();
  int line = 0;
  for (auto& g : ReadGroundTruth(gt_path)) {
    const std::string context = fmt::format("{}:{}", gt_path, ++line);
    VideoWorld& v = video_of(g.video_id, context);
    size_t& k = next_tube[g.video_id];
    if (k >= v.tubes.size()) Fail(context, "more gt tubes than listed in manifest");
    if (g.elements.empty()) Fail(context, "gt tube has no elements");
    v.tubes[k++].gt = std::move(g);
  }
  for (const auto& v : world.videos) {
    if (next_tube[v.id] != v.tubes.size()) {
      Fail(gt_path, fmt::format("video '{}' is missing gt tubes", v.id));
    }
  }

  const std::string dpath = (d / "distractors.jsonl").string();
  std::ifstream din(dpath);
  if (!din) throw ValidationError(fmt::format("cannot open '{}'", dpath));
  std::string text;
  line = 0;
  while (std::getline(din, text)) {
    const std::string context = fmt::format("{}:{}", dpath, ++line);
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const Json j = ParseLine(text, context);
    VideoWorld& v = video_of(Str(j, "video_id", context), context);
    const int k = Int(j, "tube", context);
    if (k < 0 || k >= static_cast<int>(v.tubes.size())) Fail(context, "bad tube index");
    FrameBox fb{Int(j, "frame", context), ParseBox(j, context)};
    auto& t = v.tubes[k];
    (fb.frame < t.gt.elements.front().frame ? t.before : t.after).push_back(fb);
  }

  for (int s = 0; s < 2; ++s) {
    const std::string path =
        (d / (s == 0 ? "proposals_rgb.jsonl" : "proposals_flow.jsonl")).string();
    line = 0;
    for (const auto& r : ReadDetections(path)) {
      const std::string context = fmt::format("{}:{}", path, ++line);
      VideoWorld& v = video_of(r.video_id, context);
      if (r.frame >= world.frames_per_video) Fail(context, "frame out of range");
      v.proposals[r.frame][s].push_back(r.det);
    }
  }
  return world;
}

}  // namespace pcsc
