// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "commands.h"

#include <fmt/format.h>
#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcsc/config.h"
#include "pcsc/error.h"
#include "pcsc/eval.h"
#include "pcsc/harness.h"
#include "pcsc/io.h"
#include "pcsc/refine.h"
#include "pcsc/tubes.h"

namespace pcsc::cli {
namespace {

namespace fs = std::filesystem;
using OJson = nlohmann::ordered_json;

std::string Join(const fs::path& dir, const std::string& name) {
  return (dir / name).string();
}

ScenarioConfig ConfigOrDefault(const std::string& path) {
  ScenarioConfig cfg = path.empty() ? ScenarioConfig{} : LoadConfig(path);
  cfg.Validate();
  return cfg;
}

// A threshold argument is either a single value or "0.5:0.95" for the averaged
// protocol.
struct Threshold {
  std::string label;
  std::optional<double> delta;  // nullopt: averaged over CocoThresholds()
};

std::vector<Threshold> ParseThresholds(const std::vector<std::string>& specs) {
  std::vector<Threshold> out;
  for (const auto& s : specs) {
    if (s == "0.5:0.95") {
      out.push_back({s, std::nullopt});
      continue;
    }
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || !(d >= 0.0 && d <= 1.0)) {
      throw ValidationError(fmt::format(
          "--delta '{}': expected a value in [0, 1] or 0.5:0.95", s));
    }
    out.push_back({FormatReal(d), d});
  }
  if (out.empty()) out.push_back({"0.5", 0.5});
  return out;
}

OJson ReportEntry(const Threshold& t, const EvalResult& r) {
  OJson j;
  j["threshold"] = t.label;
  j["map"] = Round6(r.map);
  OJson ap = OJson::object();
  for (const auto& [c, v] : r.ap) ap[std::to_string(c)] = Round6(v);
  j["ap"] = std::move(ap);
  j["classes_without_gt"] = r.classes_without_gt;
  return j;
}

void AppendApRows(const Threshold& t, const EvalResult& r, std::string* csv) {
  for (const auto& [c, v] : r.ap) {
    *csv += fmt::format("{},{},{}\n", t.label, c, FormatReal(v));
  }
  *csv += fmt::format("{},mAP,{}\n", t.label, FormatReal(r.map));
}

// Averages per-class AP and mAP over the ten thresholds of the averaged
// protocol.
template <typename MapFn>
EvalResult AveragedResult(MapFn map_at) {
  EvalResult avg;
  const auto deltas = CocoThresholds();
  std::set<int> without;
  for (double d : deltas) {
    const EvalResult r = map_at(d);
    avg.map += r.map / deltas.size();
    for (const auto& [c, v] : r.ap) avg.ap[c] += v / deltas.size();
    without.insert(r.classes_without_gt.begin(), r.classes_without_gt.end());
  }
  avg.classes_without_gt.assign(without.begin(), without.end());
  return avg;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
};

void Generate(const GenerateArgs& a) {
  ScenarioConfig cfg = ConfigOrDefault(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const SyntheticWorld world = GenerateWorld(cfg, cfg.seed);
  WriteWorld(a.out, world, cfg);
}

// --------------------------------------------------------------------- run

struct RunArgs {
  std::string config;
  std::string world;
  std::string out;
  std::optional<int> stages;
};

void Run(const RunArgs& a) {
  ScenarioConfig cfg = ConfigOrDefault(a.config);
  if (a.stages) {
    cfg.cooperation.num_stages = *a.stages;
    cfg.Validate();
  }
  const SyntheticWorld world = ReadWorld(a.world);
  const WorldRun run = RunWorld(cfg, world);
  const int stages = cfg.cooperation.num_stages;
  const fs::path out(a.out);

  // Everything is serialized before the first file is written.
  std::vector<std::vector<std::string>> stage_lines(stages + 1);
  for (int t = 0; t <= stages; ++t) {
    for (size_t v = 0; v < world.videos.size(); ++v) {
      for (const auto& d : StageDetections(world.videos[v].id, run.videos[v], t)) {
        stage_lines[t].push_back(
            DetectionToJson({d.video_id, d.frame, d.det, std::nullopt, t}));
      }
    }
  }
  std::string stages_csv = "stage,frame_map\n";
  for (int t = 0; t <= stages; ++t) {
    stages_csv += fmt::format("{},{}\n", t, FormatReal(run.metrics.stage_frame_map[t]));
  }
  std::vector<std::string> tube_lines;
  std::vector<std::string> feature_lines;
  for (size_t i = 0; i < run.tubes.size(); ++i) {
    tube_lines.push_back(TubeToJson(run.tubes[i]));
    TubeFeatures f;
    f.tube = static_cast<int>(i);
    f.features = run.descriptors[i];
    feature_lines.push_back(TubeFeaturesToJson(f));
  }
  WeightFile weights;
  if (cfg.feature_cooperation) weights.message = HarnessMessageParams(cfg.features);
  weights.actionness = run.classifier;
  const std::string weights_text = WeightsToJson(weights);

  OJson summary;
  summary["config_hash"] = ConfigHash(cfg);
  summary["world_seed"] = world.seed;
  summary["num_stages"] = stages;
  summary["stage_frame_map"] = OJson::array();
  for (double m : run.metrics.stage_frame_map) summary["stage_frame_map"].push_back(Round6(m));
  summary["stage_coverage"] = OJson::array();
  for (double m : run.metrics.stage_coverage) summary["stage_coverage"].push_back(Round6(m));
  summary["video_map_before"] = Round6(run.metrics.video_map_before);
  summary["video_map_after"] = Round6(run.metrics.video_map_after);
  summary["degenerate_classes"] = run.metrics.degenerate_classes;

  for (int t = 0; t <= stages; ++t) {
    WriteLines(Join(out, fmt::format("detections_stage{}.jsonl", t)), stage_lines[t]);
  }
  WriteText(Join(out, "stages.csv"), stages_csv);
  WriteLines(Join(out, "tubes.jsonl"), tube_lines);
  WriteLines(Join(out, "tube_features.jsonl"), feature_lines);
  WriteText(Join(out, "weights.json"), weights_text);
  WriteText(Join(out, "summary.json"), summary.dump(2) + "\n");
}

// -------------------------------------------------------------------- link

struct LinkArgs {
  std::string config;
  std::string detections;
  std::string out;
};

void Link(const LinkArgs& a) {
  const ScenarioConfig cfg = ConfigOrDefault(a.config);
  const auto records = ReadDetections(a.detections);
  // video -> frame -> detections, all ordered.
  std::map<std::string, std::map<int, std::vector<ScoredBox>>> by_video;
  int num_classes = 0;
  for (const auto& r : records) {
    by_video[r.video_id][r.frame].push_back(r.det);
    num_classes = std::max(num_classes, r.det.class_id + 1);
  }
  std::vector<std::string> lines;
  for (const auto& [video, frames] : by_video) {
    std::vector<FrameDetections> seq;
    for (const auto& [f, dets] : frames) seq.push_back({f, dets});
    for (int c = 0; c < num_classes; ++c) {
      for (auto& t : LinkTubes(seq, c, cfg.link)) {
        t.video_id = video;
        lines.push_back(TubeToJson(t));
      }
    }
  }
  WriteLines(a.out, lines);
}

// ------------------------------------------------------------------ refine

struct RefineArgs {
  std::string config;
  std::string tubes;
  std::string features;
  std::string weights;
  std::string out;
  std::optional<double> tau;
  std::optional<int> window;
};

std::string TubeName(size_t i, const ActionTube& t) {
  return fmt::format("tube {} (video {}, class {})", i, t.video_id, t.class_id);
}

void Refine(const RefineArgs& a) {
  ScenarioConfig cfg = ConfigOrDefault(a.config);
  RefineParams params = cfg.refine;
  if (a.tau) params.tau = *a.tau;
  if (a.window) params.window = *a.window;
  params.Validate();

  const auto tubes = ReadTubes(a.tubes);
  const auto features = ReadTubeFeatures(a.features);
  std::optional<WeightFile> weights;
  if (!a.weights.empty()) weights = ReadWeights(a.weights);
  if (features.size() != tubes.size()) {
    throw ValidationError(fmt::format(
        "{} lists {} tubes but {} has {} ({})", a.tubes, tubes.size(),
        a.features, features.size(),
        features.size() < tubes.size()
            ? "missing features for " + TubeName(features.size(), tubes[features.size()])
            : fmt::format("extra features for tube {}", tubes.size())));
  }

  std::vector<std::vector<double>> scores(tubes.size());
  for (size_t i = 0; i < tubes.size(); ++i) {
    const auto& t = tubes[i];
    const auto& f = features[i];
    const std::string name = TubeName(i, t);
    if (f.tube != static_cast<int>(i)) {
      throw ValidationError(fmt::format(
          "{}: feature record on line {} is for tube {}", name, i + 1, f.tube));
    }
    if (!f.features.empty()) {
      if (!weights) {
        throw ValidationError(fmt::format(
            "{}: descriptor features need --weights", name));
      }
      if (f.features.size() != t.elements.size()) {
        throw ValidationError(fmt::format(
            "{}: {} elements but {} feature rows", name, t.elements.size(),
            f.features.size()));
      }
      if (t.class_id >= weights->actionness.num_classes()) {
        throw ValidationError(fmt::format(
            "{}: weights have no actionness scorer for this class", name));
      }
      const auto& scorer = weights->actionness.scorer(t.class_id);
      for (const auto& row : f.features) {
        if (!scorer.degenerate && row.size() != scorer.weights.size()) {
          throw ValidationError(fmt::format(
              "{}: feature rows have {} dims, scorer expects {}", name,
              row.size(), scorer.weights.size()));
        }
        scores[i].push_back(scorer.Probability(row));
      }
    } else {
      if (f.actionness.size() != t.elements.size()) {
        throw ValidationError(fmt::format(
            "{}: {} elements but {} actionness scores", name,
            t.elements.size(), f.actionness.size()));
      }
      scores[i] = f.actionness;
    }
  }

  std::vector<std::string> lines;
  for (size_t i = 0; i < tubes.size(); ++i) {
    for (const auto& r : RefineTube(tubes[i], scores[i], params)) {
      lines.push_back(TubeToJson(r));
    }
  }
  OJson manifest;
  manifest["format"] = "pcsc-refine";
  manifest["version"] = 1;
  manifest["input_tubes"] = tubes.size();
  manifest["output_tubes"] = lines.size();
  manifest["window"] = params.window;
  manifest["tau"] = Round6(params.tau);
  manifest["min_seg_len"] = params.min_seg_len;
  const fs::path out(a.out);
  WriteLines(a.out, lines);
  WriteText(Join(out.has_parent_path() ? out.parent_path() : fs::path("."),
                 out.stem().string() + ".manifest.json"),
            manifest.dump(2) + "\n");
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string detections;
  std::string tubes;
  std::string gt;
  std::vector<std::string> deltas;
  std::string level;
  std::string out;
};

void Eval(const EvalArgs& a) {
  const bool frame = a.level == "frame";
  if (frame && a.detections.empty()) {
    throw ValidationError("--level frame requires --detections");
  }
  if (!frame && a.tubes.empty()) {
    throw ValidationError("--level video requires --tubes");
  }
  const auto thresholds = ParseThresholds(a.deltas);
  const auto gt_tubes = ReadGroundTruth(a.gt);

  OJson report;
  report["level"] = a.level;
  report["ground_truth"] = a.gt;
  report["results"] = OJson::array();
  std::string csv = "threshold,class,ap\n";

  auto emit = [&](const Threshold& t, const EvalResult& r) {
    report["results"].push_back(ReportEntry(t, r));
    AppendApRows(t, r, &csv);
  };
  if (frame) {
    std::vector<FrameDetection> dets;
    for (const auto& r : ReadDetections(a.detections)) {
      dets.push_back({r.video_id, r.frame, r.det});
    }
    const auto gt = FlattenGroundTruth(gt_tubes);
    auto at = [&](double d) { return FrameMap(dets, gt, d); };
    for (const auto& t : thresholds) emit(t, t.delta ? at(*t.delta) : AveragedResult(at));
  } else {
    const auto tubes = ReadTubes(a.tubes);
    auto at = [&](double d) { return VideoMap(tubes, gt_tubes, d); };
    for (const auto& t : thresholds) emit(t, t.delta ? at(*t.delta) : AveragedResult(at));
  }
  const fs::path out(a.out);
  WriteText(Join(out, "report.json"), report.dump(2) + "\n");
  WriteText(Join(out, "ap.csv"), csv);
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
};

OJson ExperimentJson(const ExperimentResult& r) {
  OJson j;
  j["mean_stage_frame_map"] = OJson::array();
  for (double m : r.mean_stage_frame_map) j["mean_stage_frame_map"].push_back(Round6(m));
  j["mean_video_map_before"] = Round6(r.mean_video_map_before);
  j["mean_video_map_after"] = Round6(r.mean_video_map_after);
  j["refinement_delta"] = Round6(r.RefinementDelta());
  OJson seeds = OJson::array();
  for (const auto& s : r.seeds) {
    OJson sj;
    sj["seed"] = s.seed;
    sj["stage_frame_map"] = OJson::array();
    for (double m : s.stage_frame_map) sj["stage_frame_map"].push_back(Round6(m));
    sj["stage_coverage"] = OJson::array();
    for (double m : s.stage_coverage) sj["stage_coverage"].push_back(Round6(m));
    sj["video_map_before"] = Round6(s.video_map_before);
    sj["video_map_after"] = Round6(s.video_map_after);
    sj["degenerate_classes"] = s.degenerate_classes;
    seeds.push_back(std::move(sj));
  }
  j["per_seed"] = std::move(seeds);
  return j;
}

void Report(const ReportArgs& a) {
  ScenarioConfig cfg = ConfigOrDefault(a.config);
  if (a.seed) cfg.seed = *a.seed;
  ScenarioConfig proposal_only = cfg;
  proposal_only.feature_cooperation = false;

  const std::vector<std::pair<std::string, ExperimentResult>> variants = {
      {"full", RunExperiment(cfg)},
      {"proposal_only", RunExperiment(proposal_only)}};

  std::string stages_csv = "variant,stage,frame_map\n";
  std::string refine_csv = "variant,video_map_before,video_map_after,delta\n";
  OJson manifest;
  manifest["config_hash"] = ConfigHash(cfg);
  manifest["seeds"] = OJson::array();
  for (int k = 0; k < cfg.num_seeds; ++k) manifest["seeds"].push_back(cfg.seed + k);
  manifest["metrics"] = OJson::object();
  for (const auto& [name, r] : variants) {
    for (size_t t = 0; t < r.mean_stage_frame_map.size(); ++t) {
      stages_csv += fmt::format("{},{},{}\n", name, t, FormatReal(r.mean_stage_frame_map[t]));
    }
    refine_csv += fmt::format("{},{},{},{}\n", name, FormatReal(r.mean_video_map_before),
                              FormatReal(r.mean_video_map_after),
                              FormatReal(r.RefinementDelta()));
    manifest["metrics"][name] = ExperimentJson(r);
  }
  const fs::path out(a.out);
  WriteText(Join(out, "stages.csv"), stages_csv);
  WriteText(Join(out, "refinement.csv"), refine_csv);
  WriteText(Join(out, "experiment.json"), manifest.dump(2) + "\n");
  WriteText(Join(out, "config.ini"), ConfigToIni(cfg));
}

// ------------------------------------------------------------------------

void ApplyThreadEnv() {
  const char* env = std::getenv("PCSC_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) {
    throw ValidationError(fmt::format(
        "PCSC_THREADS='{}': expected an integer in [1, 1024]", env));
  }
  omp_set_num_threads(static_cast<int>(n));
}

}  // namespace

int Main(int argc, char** argv) {
  CLI::App app{"Two-stream progressive cooperation action detection toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic two-stream world");
  g->add_option("--config", gen.config, "Scenario config (INI)");
  g->add_option("--out", gen.out, "Output world directory")->required();
  g->add_option("--seed", gen.seed, "Override scenario.seed");

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run the staged pipeline on a world");
  r->add_option("--config", run.config, "Scenario config (INI)");
  r->add_option("--world", run.world, "World directory")->required();
  r->add_option("--out", run.out, "Output directory")->required();
  r->add_option("--stages", run.stages, "Override cooperation.num_stages")
      ->check(CLI::NonNegativeNumber);

  LinkArgs link;
  auto* l = app.add_subcommand("link", "Link per-frame detections into tubes");
  l->add_option("--config", link.config, "Config providing [link] parameters");
  l->add_option("--detections", link.detections, "Detections JSONL")->required();
  l->add_option("--out", link.out, "Output tubes JSONL")->required();

  RefineArgs ref;
  auto* f = app.add_subcommand("refine", "Temporally refine tubes by actionness");
  f->add_option("--config", ref.config, "Config providing [refine] parameters");
  f->add_option("--tubes", ref.tubes, "Tubes JSONL")->required();
  f->add_option("--features", ref.features, "Per-tube features JSONL")->required();
  f->add_option("--weights", ref.weights, "Weight file with actionness scorers");
  f->add_option("--tau", ref.tau, "Override refine.tau");
  f->add_option("--window", ref.window, "Override refine.window");
  f->add_option("--out", ref.out, "Output tubes JSONL")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compute frame or video mAP");
  auto* dopt = e->add_option("--detections", ev.detections, "Detections JSONL");
  auto* topt = e->add_option("--tubes", ev.tubes, "Tubes JSONL");
  dopt->excludes(topt);
  e->add_option("--gt", ev.gt, "Ground-truth tubes JSONL")->required();
  e->add_option("--delta", ev.deltas, "IoU threshold, repeatable; 0.5:0.95 averages");
  e->add_option("--level", ev.level, "frame or video")
      ->check(CLI::IsMember({"frame", "video"}));
  e->add_option("--out", ev.out, "Output directory")->required();

  ReportArgs rep;
  auto* p = app.add_subcommand("report", "Run the multi-seed ablation experiment");
  p->add_option("--config", rep.config, "Scenario config (INI)");
  p->add_option("--out", rep.out, "Output directory")->required();
  p->add_option("--seed", rep.seed, "Override scenario.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    ApplyThreadEnv();
    if (g->parsed()) {
      Generate(gen);
    } else if (r->parsed()) {
      Run(run);
    } else if (l->parsed()) {
      Link(link);
    } else if (f->parsed()) {
      Refine(ref);
    } else if (e->parsed()) {
      if (ev.level.empty()) ev.level = ev.tubes.empty() ? "frame" : "video";
      Eval(ev);
    } else if (p->parsed()) {
      Report(rep);
    }
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace pcsc::cli
