// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/cooperation.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <tuple>
#include <random>

#include "oracles.h"
#include "pcsc/error.h"

namespace pcsc {
namespace {

constexpr double kW = 100.0;
constexpr double kH = 100.0;

// Head driven by a callable, for scripting stage outputs.
class ScriptedHead : public DetectionHead {
 public:
  using Fn = std::function<std::vector<ScoredBox>(const ProposalSet&)>;
  explicit ScriptedHead(Fn fn) : fn_(std::move(fn)) {}
  DetectionSet Detect(const ProposalSet& p) const override {
    return {p.stream, p.stage, fn_(p)};
  }

 private:
  Fn fn_;
};

ScoredBox Sb(double x1, double y1, double x2, double y2, double score, int cls = 0) {
  return {{x1, y1, x2, y2}, cls, score};
}

bool Contains(const std::vector<ScoredBox>& v, const ScoredBox& b) {
  return std::find(v.begin(), v.end(), b) != v.end();
}

TEST(ScheduleTest, AlternatesRgbFlow) {
  EXPECT_EQ(ScheduledStream(1), StreamId::kRgb);
  EXPECT_EQ(ScheduledStream(2), StreamId::kFlow);
  EXPECT_EQ(ScheduledStream(3), StreamId::kRgb);
  EXPECT_EQ(ScheduledStream(4), StreamId::kFlow);
  EXPECT_EQ(Other(StreamId::kRgb), StreamId::kFlow);
  EXPECT_EQ(Other(StreamId::kFlow), StreamId::kRgb);
  EXPECT_EQ(ParseStream(StreamName(StreamId::kFlow)), StreamId::kFlow);
  EXPECT_THROW(ParseStream("depth"), ValidationError);
}

TEST(UpdateProposalsTest, StageTwoUnion) {
  StageState s(kW, kH);
  const ScoredBox b1 = Sb(0, 0, 10, 10, 0.7);
  const ScoredBox b2 = Sb(50, 50, 60, 60, 0.9);
  s.SetInitial({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, {b1}});
  s.Append({StreamId::kRgb, 1, {b2}});
  const ProposalSet p = UpdateProposals(s, 2, {});
  EXPECT_EQ(p.stream, StreamId::kFlow);
  EXPECT_EQ(p.stage, 2);
  ASSERT_EQ(p.proposals.size(), 2u);
  EXPECT_TRUE(Contains(p.proposals, b1));
  EXPECT_TRUE(Contains(p.proposals, b2));
}

TEST(UpdateProposalsTest, StageOneWithEmptyFlow) {
  StageState s(kW, kH);
  const std::vector<ScoredBox> rgb = {Sb(0, 0, 10, 10, 0.7), Sb(30, 30, 40, 45, 0.2, 1)};
  s.SetInitial({StreamId::kRgb, 0, rgb}, {StreamId::kFlow, 0, {}});
  EXPECT_EQ(UpdateProposals(s, 1, {}).proposals, rgb);
}

TEST(UpdateProposalsTest, ConfidenceFilter) {
  StageState s(kW, kH);
  const ScoredBox hi = Sb(0, 0, 10, 10, 0.9);
  const ScoredBox lo = Sb(50, 50, 60, 60, 0.01);
  s.SetInitial({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, {hi, lo}});
  const auto p = UpdateProposals(s, 1, {});
  EXPECT_EQ(p.proposals, std::vector<ScoredBox>{hi});
}

TEST(UpdateProposalsTest, CrossTermUsesLowerNmsThreshold) {
  // IoU 1/3: kept at the standard 0.5 threshold, suppressed at 0.3.
  const ScoredBox a = Sb(0, 0, 10, 10, 0.9);
  const ScoredBox b = Sb(5, 0, 15, 10, 0.8);
  StageState s(kW, kH);
  s.SetInitial({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, {a, b}});
  EXPECT_EQ(UpdateProposals(s, 1, {}).proposals, std::vector<ScoredBox>{a});
  CooperationParams loose;
  loose.nms_cross = 0.5;
  EXPECT_EQ(UpdateProposals(s, 1, loose).proposals.size(), 2u);
}

TEST(UpdateProposalsTest, CrossFilterOrdersAgree) {
  // Greedy NMS only lets a box suppress lower-scored ones and the filter is
  // a score threshold, so both orders must select the same cross term.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ScoredBox> flow(10);
    for (auto& d : flow) d = {testing::RandomBox(rng, 30, 3, 15), static_cast<int>(u(rng) * 2), u(rng)};
    StageState s(kW, kH);
    s.SetInitial({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, flow});
    CooperationParams p;
    p.confidence_min = u(rng);
    const auto a = UpdateProposals(s, 1, p).proposals;
    p.cross_order = CrossFilterOrder::kNmsThenFilter;
    const auto b = UpdateProposals(s, 1, p).proposals;
    ASSERT_EQ(a, b);
    for (const auto& d : a) ASSERT_GE(d.score, p.confidence_min);
  }
}

TEST(UpdateProposalsTest, ClipsAndDeduplicates) {
  StageState s(kW, kH);
  const ScoredBox inside = Sb(90, 90, 100, 100, 0.9);
  const ScoredBox outside = Sb(90, 90, 120, 130, 0.9);
  s.SetInitial({StreamId::kRgb, 0, {inside}}, {StreamId::kFlow, 0, {outside}});
  const auto p = UpdateProposals(s, 1, {});
  EXPECT_EQ(p.proposals, std::vector<ScoredBox>{inside});
}

TEST(UpdateProposalsTest, MissingHistoryNamesThePair) {
  StageState s(kW, kH);
  s.SetInitial({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, {}});
  try {
    UpdateProposals(s, 3, {});
    FAIL() << "expected a structural error";
  } catch (const StructuralError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("rgb"), std::string::npos) << what;
    EXPECT_NE(what.find('1'), std::string::npos) << what;
  }
}

TEST(RunStageTest, IdentityHeadPassesProposalsThrough) {
  const IdentityHead head(kW, kH);
  const std::vector<ScoredBox> rgb = {Sb(0, 0, 10, 10, 0.7)};
  const std::vector<ScoredBox> flow = {Sb(40, 40, 50, 50, 0.6)};
  StageState s = InitStageState({StreamId::kRgb, 0, rgb}, {StreamId::kFlow, 0, flow},
                                head, kW, kH);
  EXPECT_EQ(s.stage(), 0);
  const ProposalSet p1 = UpdateProposals(s, 1, {});
  s = RunStage(std::move(s), head, {});
  EXPECT_EQ(s.stage(), 1);
  EXPECT_EQ(s.Get(StreamId::kRgb, 1).detections, p1.proposals);
}

TEST(RunStageTest, ZeroStagesLeavesStateUnchanged) {
  const IdentityHead head(kW, kH);
  StageState s = InitStageState({StreamId::kRgb, 0, {Sb(0, 0, 5, 5, 0.5)}},
                                {StreamId::kFlow, 0, {}}, head, kW, kH);
  CooperationParams p;
  p.num_stages = 0;
  const auto before = s.history();
  s = RunStages(std::move(s), head, p);
  EXPECT_EQ(s.stage(), 0);
  EXPECT_EQ(s.history().size(), before.size());
}

TEST(RunStageTest, HistoryFollowsSchedule) {
  const IdentityHead head(kW, kH);
  StageState s = InitStageState({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, {}},
                                head, kW, kH);
  s = RunStages(std::move(s), head, {});
  EXPECT_EQ(s.stage(), 4);
  EXPECT_TRUE(s.Has(StreamId::kRgb, 0));
  EXPECT_TRUE(s.Has(StreamId::kFlow, 0));
  for (int t = 1; t <= 4; ++t) {
    EXPECT_TRUE(s.Has(ScheduledStream(t), t));
    EXPECT_FALSE(s.Has(Other(ScheduledStream(t)), t));
  }
}

TEST(RunStageTest, AppendRejectsWrongStream) {
  StageState s(kW, kH);
  s.SetInitial({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, {}});
  EXPECT_THROW(s.Append({StreamId::kFlow, 1, {}}), StructuralError);
  EXPECT_THROW(s.Append({StreamId::kRgb, 2, {}}), StructuralError);
}

TEST(RunStageTest, HeadFailurePropagates) {
  const ScriptedHead bad([](const ProposalSet& p) -> std::vector<ScoredBox> {
    if (p.stage == 2) throw std::runtime_error("head exploded");
    return p.proposals;
  });
  StageState s = InitStageState({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, {}},
                                bad, kW, kH);
  EXPECT_THROW(RunStages(std::move(s), bad, {}), std::runtime_error);
}

TEST(CombineOutputsTest, Examples) {
  StageState s(kW, kH);
  const ScoredBox r = Sb(0, 0, 10, 10, 0.9);
  const ScoredBox f = Sb(0, 0, 10, 10, 0.8);
  s.SetInitial({StreamId::kRgb, 0, {r}}, {StreamId::kFlow, 0, {f}});
  EXPECT_EQ(CombineOutputs(s, 0, {}), std::vector<ScoredBox>{r});

  StageState single(kW, kH);
  single.SetInitial({StreamId::kRgb, 0, {r}}, {StreamId::kFlow, 0, {}});
  EXPECT_EQ(CombineOutputs(single, 0, {}), std::vector<ScoredBox>{r});
  EXPECT_THROW(CombineOutputs(single, 1, {}), StructuralError);
}

TEST(CombineOutputsTest, MatchesUnionThenNmsOracle) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(0, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    // Script 4 stages of <= 2 boxes each, beside stage 0 (<= 8 boxes total).
    std::vector<std::vector<ScoredBox>> script(6);
    std::vector<ScoredBox> all;
    for (auto& dets : script) {
      const int n = count(rng);
      for (int i = 0; i < n && all.size() < 8; ++i) {
        dets.push_back({testing::RandomBox(rng, 20, 2, 12), static_cast<int>(u(rng) * 2), u(rng)});
        all.push_back(dets.back());
      }
    }
    const ScriptedHead head([&](const ProposalSet& p) {
      return p.stage == 0 ? script[p.stream == StreamId::kRgb ? 0 : 1] : script[p.stage + 1];
    });
    StageState s = InitStageState({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, {}},
                                  head, kW, kH);
    s = RunStages(std::move(s), head, {});

    std::vector<ScoredBox> unioned;
    for (int t = 0; t <= 4; ++t) {
      if (t == 0) {
        unioned.insert(unioned.end(), script[0].begin(), script[0].end());
        unioned.insert(unioned.end(), script[1].begin(), script[1].end());
      } else {
        unioned.insert(unioned.end(), script[t + 1].begin(), script[t + 1].end());
      }
      auto got = CombineOutputs(s, t, {});
      auto want = testing::OracleNms(unioned, 0.5);
      auto key = [](const ScoredBox& a, const ScoredBox& b) {
        return std::tie(a.score, a.class_id, a.box.x1, a.box.y1) <
               std::tie(b.score, b.class_id, b.box.x1, b.box.y1);
      };
      std::sort(got.begin(), got.end(), key);
      std::sort(want.begin(), want.end(), key);
      ASSERT_EQ(got, want) << "trial " << trial << " stage " << t;
    }
  }
}

TEST(CombineOutputsTest, StoredDetectionsOnlyAccumulate) {
  // The union feeding combine_outputs grows with t, so the best IoU any
  // stored detection achieves against a gt box never drops.
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Box gt = testing::RandomBox(rng, 50, 5, 20);
    std::vector<std::vector<ScoredBox>> script(6);
    for (auto& dets : script) {
      for (int i = 0; i < 3; ++i) {
        Box b = gt;
        const double d = (u(rng) - 0.5) * 10;
        b.x1 += d;
        b.x2 += d;
        dets.push_back({b, 0, u(rng)});
      }
    }
    const ScriptedHead head([&](const ProposalSet& p) {
      return p.stage == 0 ? script[p.stream == StreamId::kRgb ? 0 : 1] : script[p.stage + 1];
    });
    StageState s = InitStageState({StreamId::kRgb, 0, {}}, {StreamId::kFlow, 0, {}},
                                  head, kW, kH);
    s = RunStages(std::move(s), head, {});
    double previous = 0.0;
    for (int t = 0; t <= 4; ++t) {
      double best = 0.0;
      for (const auto& [key, set] : s.history()) {
        if (key.second > t) continue;
        for (const auto& d : set.detections) best = std::max(best, Iou(d.box, gt));
      }
      ASSERT_GE(best, previous);
      previous = best;
      // Every combined survivor comes from the stored union.
      for (const auto& d : CombineOutputs(s, t, {})) {
        bool found = false;
        for (const auto& [key, set] : s.history()) {
          if (key.second <= t) found = found || Contains(set.detections, d);
        }
        ASSERT_TRUE(found);
      }
    }
  }
}

TEST(LabelProposalsTest, Examples) {
  const std::vector<LabeledBox> gt = {{{0, 0, 10, 10}, 2}, {{50, 50, 60, 60}, 1}};
  const std::vector<ScoredBox> props = {Sb(0, 0, 10, 10, 0.5), Sb(80, 80, 90, 90, 0.5),
                                        Sb(5, 0, 15, 10, 0.5)};
  const auto labels = LabelProposals(props, gt);
  ASSERT_EQ(labels.size(), 3u);
  EXPECT_TRUE(labels[0].positive);
  EXPECT_EQ(labels[0].class_id, 2);
  EXPECT_FALSE(labels[1].positive);
  EXPECT_FALSE(labels[2].positive);
  EXPECT_NEAR(labels[2].max_iou, 1.0 / 3.0, 1e-12);
}

TEST(LabelProposalsTest, OrderInvariant) {
  std::mt19937_64 rng(29);
  std::vector<LabeledBox> gt;
  for (int i = 0; i < 5; ++i) gt.push_back({testing::RandomBox(rng, 40, 5, 20), i % 3});
  std::vector<ScoredBox> props;
  for (int i = 0; i < 40; ++i) props.push_back({testing::RandomBox(rng, 40, 5, 20), 0, 0.5});
  const auto base = LabelProposals(props, gt);
  std::vector<int> perm(props.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<ScoredBox> shuffled;
  for (int i : perm) shuffled.push_back(props[i]);
  const auto labels = LabelProposals(shuffled, gt);
  for (size_t k = 0; k < perm.size(); ++k) {
    EXPECT_EQ(labels[k].positive, base[perm[k]].positive);
    EXPECT_EQ(labels[k].class_id, base[perm[k]].class_id);
  }
}

TEST(CooperationParamsTest, Validation) {
  CooperationParams p;
  EXPECT_NO_THROW(p.Validate());
  p.nms_cross = 0.6;
  EXPECT_THROW(p.Validate(), ValidationError);
  p = {};
  p.num_stages = -1;
  EXPECT_THROW(p.Validate(), ValidationError);
  p = {};
  p.confidence_min = 1.5;
  EXPECT_THROW(p.Validate(), ValidationError);
}

}  // namespace
}  // namespace pcsc
