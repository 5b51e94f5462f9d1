// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "cli_util.h"
#include "gradcheck.h"
#include "oracles.h"
#include "pcsc/eval.h"
#include "pcsc/fusion.h"
#include "pcsc/geometry.h"
#include "pcsc/harness.h"
#include "pcsc/refine.h"

namespace pcsc {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ------------------------------------------------------------------ C1

Verdict GradientCorrectness() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 6);
  const int pairs[][2] = {{1, 1}, {2, 1}, {2, 2}, {3, 1}, {4, 1}, {4, 2}, {4, 4}};
  double worst = 0.0;
  const int instances = 60;
  for (int i = 0; i < instances; ++i) {
    const auto [c, r] = pairs[i % 7];
    const auto g = testing::RandomGradInstance(rng, c, r, dim(rng), dim(rng));
    worst = std::max(worst, testing::MaxGradientError(g, 1e-5));
  }
  const double secs = Seconds(start);
  return {worst < 1e-5 && secs < 5.0,
          fmt::format("{} instances, max rel err {:.2e}, {:.2f}s", instances, worst, secs)};
}

// ------------------------------------------------------------------ C2

Verdict FusionIdentity() {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> dim(1, 9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const int pairs[][2] = {{1, 1}, {2, 1}, {2, 2}, {4, 2}, {4, 4}, {6, 3}, {8, 2}};
  int trials = 0;
  int failures = 0;
  for (int i = 0; i < 500; ++i) {
    const auto [c, r] = pairs[i % 7];
    const int h = dim(rng);
    const int w = dim(rng);
    MessageParams p = MessageParams::Initialize(c, r, i, 1.0);
    for (auto& v : p.b1) v = u(rng);  // W2 and b2 stay zero
    FeatureMap target(c, h, w);
    FeatureMap src(c, h, w);
    for (auto& v : target.data()) v = u(rng);
    for (auto& v : src.data()) v = u(rng);
    ++trials;
    if (!(Fuse(target, src, p) == target)) ++failures;
  }
  return {failures == 0, fmt::format("{} random shapes, {} mismatches", trials, failures)};
}

// ------------------------------------------------------------------ C3

Verdict NmsOracle() {
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<int> count(0, 8);
  std::uniform_int_distribution<int> cls(0, 1);
  std::uniform_int_distribution<int> step(0, 5);
  std::uniform_real_distribution<double> thr(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ScoredBox> d;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      d.push_back({testing::RandomBox(rng, 20, 2, 12), cls(rng), step(rng) / 5.0});
    }
    const double t = trial % 10 == 0 ? 0.5 : thr(rng);
    if (Nms(d, t) != testing::OracleNms(d, t)) ++mismatches;
  }
  return {mismatches == 0, fmt::format("1000 instances (<= 8 boxes), {} mismatches", mismatches)};
}

// ------------------------------------------------------------------ C4

Verdict ApOracle() {
  std::mt19937_64 rng(104);
  double worst = 0.0;
  int compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto inst = testing::RandomFrameInstance(rng);
    for (int c = 0; c < 2; ++c) {
      const auto got = FrameAp(inst.dets, inst.gt, c, 0.5);
      if (!got) continue;
      worst = std::max(worst, std::abs(*got - testing::OracleFrameAp(inst.dets, inst.gt, c, 0.5)));
      ++compared;
    }
  }
  return {worst < 1e-12 && compared > 0,
          fmt::format("500 instances ({} class APs), max abs err {:.1e}", compared, worst)};
}

// ------------------------------------------------------------------ C5

Verdict ThresholdMonotonicity() {
  int fixtures = 0;
  int violations = 0;
  auto check = [&](double a, double b, double c) {
    ++fixtures;
    if (!(a >= b && b >= c)) ++violations;
  };
  std::mt19937_64 rng(105);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = testing::RandomFrameInstance(rng);
    check(FrameMap(inst.dets, inst.gt, 0.2).map, FrameMap(inst.dets, inst.gt, 0.5).map,
          FrameMap(inst.dets, inst.gt, 0.75).map);
  }
  ScenarioConfig cfg;
  cfg.rgb.boundary_pad = cfg.flow.boundary_pad = 3;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    const SyntheticWorld world = GenerateWorld(cfg, seed);
    const WorldRun run = RunWorld(cfg, world);
    const auto gt = GroundTruth(world);
    check(VideoMap(run.tubes, gt, 0.2).map, VideoMap(run.tubes, gt, 0.5).map,
          VideoMap(run.tubes, gt, 0.75).map);
    std::vector<FrameDetection> dets;
    for (size_t v = 0; v < world.videos.size(); ++v) {
      const auto d = StageDetections(world.videos[v].id, run.videos[v],
                                     cfg.cooperation.num_stages);
      dets.insert(dets.end(), d.begin(), d.end());
    }
    const auto fgt = FlattenGroundTruth(gt);
    check(FrameMap(dets, fgt, 0.2).map, FrameMap(dets, fgt, 0.5).map,
          FrameMap(dets, fgt, 0.75).map);
  }
  return {violations == 0, fmt::format("{} fixtures, {} violations", fixtures, violations)};
}

// ------------------------------------------------------------------ C6

Verdict CooperationTrend() {
  const auto start = Clock::now();
  ScenarioConfig cfg;  // disjoint 30% misses, 2 px jitter, 0.5 fp/frame
  cfg.num_seeds = 20;
  const ExperimentResult r = RunExperiment(cfg);
  const auto& m = r.mean_stage_frame_map;
  bool monotone = m.size() == 5;
  std::string table;
  for (size_t t = 0; t < m.size(); ++t) {
    table += fmt::format("{}{:.2f}", t ? " " : "", 100 * m[t]);
    if (t > 0 && m[t] < m[t - 1] - 0.005) monotone = false;
  }
  const double gain = m.back() - m.front();
  const double secs = Seconds(start);
  return {monotone && gain >= 0.02 && secs < 180.0,
          fmt::format("stage mAP [{}], gain {:+.2f} pts, {:.1f}s", table, 100 * gain, secs)};
}

// ------------------------------------------------------------------ C7

// Noise-free detections with padded boundaries; the classifier is replaced
// by the true per-element actionness.
bool OracleBoundariesExact(std::string* detail) {
  ScenarioConfig cfg;
  cfg.num_videos = 6;
  for (StreamNoise* n : {&cfg.rgb, &cfg.flow}) {
    n->miss_prob = 0.0;
    n->jitter_sigma = 0.0;
    n->fp_rate = 0.0;
    n->boundary_pad = 3;
  }
  cfg.head.regression_fraction = 1.0;
  cfg.head.jitter_sigma = 0.0;
  cfg.head.score_noise = 0.0;
  RefineParams params;
  params.window = 1;
  bool all = true;
  int gt_count = 0;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    const SyntheticWorld world = GenerateWorld(cfg, seed);
    const WorldRun run = RunWorld(cfg, world);
    std::multiset<std::tuple<std::string, int, int, int>> want;
    std::map<std::tuple<std::string, int, int>, std::vector<Box>> gt_box;  // (video, class, frame)
    for (const auto& g : GroundTruth(world)) {
      want.insert({g.video_id, g.class_id, g.elements.front().frame, g.elements.back().frame});
      for (const auto& e : g.elements) gt_box[{g.video_id, g.class_id, e.frame}].push_back(e.box);
    }
    gt_count += static_cast<int>(want.size());
    std::multiset<std::tuple<std::string, int, int, int>> got;
    for (const auto& t : run.tubes) {
      std::vector<double> actionness;
      for (const auto& e : t.elements) {
        bool on = false;
        if (auto it = gt_box.find({t.video_id, t.class_id, e.frame}); it != gt_box.end()) {
          for (const Box& g : it->second) on = on || Iou(g, e.box) > 0.5;
        }
        actionness.push_back(on ? 1.0 : 0.0);
      }
      for (const auto& r : RefineTube(t, actionness, params)) {
        got.insert({r.video_id, r.class_id, r.StartFrame(), r.EndFrame()});
      }
    }
    all = all && got == want;
  }
  *detail = fmt::format("oracle window-1 boundaries {} for {} gt tubes",
                        all ? "exact" : "NOT exact", gt_count);
  return all;
}

Verdict RefinementTrend() {
  ScenarioConfig cfg;
  cfg.rgb.boundary_pad = cfg.flow.boundary_pad = 3;
  cfg.num_seeds = 20;
  const ExperimentResult r = RunExperiment(cfg);
  const double delta = r.RefinementDelta();
  std::string oracle;
  const bool exact = OracleBoundariesExact(&oracle);
  return {delta >= 0.03 && exact,
          fmt::format("video mAP {:.2f} -> {:.2f} ({:+.2f} pts); {}", 100 * r.mean_video_map_before,
                      100 * r.mean_video_map_after, 100 * delta, oracle)};
}

// ------------------------------------------------------------------ C8

Verdict Determinism() {
  namespace fs = std::filesystem;
  const fs::path root = testing::FreshDir("acceptance_c8");
  testing::WriteFile(root / "c.ini",
                     "[scenario]\nnum_videos = 6\nseed = 11\n[flow]\nboundary_pad = 2\n");
  const std::string cfg = (root / "c.ini").string();
  const fs::path work = root / "work";
  auto pipeline = [&](int threads) -> std::vector<std::pair<std::string, std::string>> {
    fs::remove_all(work);
    const std::string w = (work / "world").string();
    const std::string o = (work / "run").string();
    const std::string gt = (work / "world" / "gt_tubes.jsonl").string();
    bool ok = testing::RunCli({"generate", "--config", cfg, "--out", w}, threads) == 0 &&
              testing::RunCli({"run", "--config", cfg, "--world", w, "--out", o}, threads) == 0 &&
              testing::RunCli({"eval", "--detections", o + "/detections_stage4.jsonl", "--gt", gt,
                               "--delta", "0.5", "--delta", "0.5:0.95", "--out",
                               (work / "eval_frame").string()},
                              threads) == 0 &&
              testing::RunCli({"eval", "--tubes", o + "/tubes.jsonl", "--gt", gt, "--delta", "0.2",
                               "--delta", "0.5", "--out", (work / "eval_video").string()},
                              threads) == 0;
    if (!ok) return {};
    return testing::Snapshot(work);
  };
  const auto a = pipeline(1);
  const auto b = pipeline(1);
  const auto c = pipeline(4);
  const auto d = pipeline(4);
  const bool pass = !a.empty() && a == b && a == c && a == d;
  return {pass, fmt::format("{} files compared over 2 runs x threads {{1, 4}}{}", a.size(),
                            a.empty() ? " (pipeline failed)" : "")};
}

// ------------------------------------------------------------------ C9

// Runs every unit-test executable and adds the time spent on the checks
// above; the whole suite must stay under five minutes.
Verdict SuiteRuntime(double acceptance_seconds) {
  const auto start = Clock::now();
  std::vector<std::string> binaries;
  std::string list = PCSC_TEST_BINARIES;
  for (size_t pos = 0; pos < list.size();) {
    const size_t semi = list.find('|', pos);
    const size_t end = semi == std::string::npos ? list.size() : semi;
    if (end > pos) binaries.push_back(list.substr(pos, end - pos));
    pos = end + 1;
  }
  int failed = 0;
  for (const auto& b : binaries) {
    const std::string cmd = testing::Quote(b) + " >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) ++failed;
  }
  const double total = Seconds(start) + acceptance_seconds;
  return {failed == 0 && total < 300.0,
          fmt::format("{} unit-test binaries ({} failed) + acceptance: {:.1f}s", binaries.size(),
                      failed, total)};
}

}  // namespace
}  // namespace pcsc

int main(int argc, char** argv) {
  using namespace pcsc;
  bool skip_suite = false;
  for (int i = 1; i < argc; ++i) skip_suite |= std::string(argv[i]) == "--skip-suite";
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Verdict()> run;
  };
  const auto start = Clock::now();
  const std::vector<Criterion> criteria = {
      {"C1", "gradient correctness", GradientCorrectness},
      {"C2", "fusion identity", FusionIdentity},
      {"C3", "NMS oracle equivalence", NmsOracle},
      {"C4", "AP oracle equivalence", ApOracle},
      {"C5", "threshold monotonicity", ThresholdMonotonicity},
      {"C6", "cooperation trend", CooperationTrend},
      {"C7", "refinement trend", RefinementTrend},
      {"C8", "determinism", Determinism},
  };
  int failures = 0;
  auto report = [&](const char* id, const char* name, const Verdict& v) {
    fmt::print("{} {} - {}: {}\n", v.pass ? "PASS" : "FAIL", id, name, v.detail);
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  };
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, fmt::format("exception: {}", e.what())};
    }
    report(c.id, c.name, v);
  }
  if (skip_suite) {
    report("C9", "suite runtime", {false, "skipped (--skip-suite)"});
  } else {
    report("C9", "suite runtime", SuiteRuntime(Seconds(start)));
  }
  return failures == 0 ? 0 : 1;
}
