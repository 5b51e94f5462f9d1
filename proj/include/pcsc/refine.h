// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Class-specific actionness scoring and temporal trimming of action tubes.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "pcsc/cooperation.h"
#include "pcsc/tubes.h"

namespace pcsc {

struct ActionnessSample {
  std::vector<double> feature;
  int label = 0;  // 0 or 1
};

// Logistic scorer for one class. A degenerate scorer (trained on a single
// label, or on nothing) returns base_rate for every input.
struct LogisticScorer {
  std::vector<double> weights;
  double bias = 0.0;
  bool degenerate = false;
  double base_rate = 0.5;

  double Probability(std::span<const double> feature) const;
};

// One binary scorer per action class.
class ActionnessClassifier {
 public:
  ActionnessClassifier() = default;
  explicit ActionnessClassifier(std::vector<LogisticScorer> scorers)
      : scorers_(std::move(scorers)) {}

  int num_classes() const { return static_cast<int>(scorers_.size()); }
  const LogisticScorer& scorer(int class_id) const;
  const std::vector<LogisticScorer>& scorers() const { return scorers_; }

  // Throws ValidationError for an unknown class id.
  double Score(int class_id, std::span<const double> feature) const;

 private:
  std::vector<LogisticScorer> scorers_;
};

using FrameGroundTruth = std::map<int, std::vector<LabeledBox>>;
using ElementFeatureFn =
    std::function<std::vector<double>(const ActionTube& tube, size_t element)>;

// One sample per element of every class-`class_id` tube; label 1 iff the
// element's IoU with a class-`class_id` gt box of the same frame is > 0.5.
std::vector<ActionnessSample> BuildTrainingSet(
    std::span<const ActionTube> tubes, int class_id, const FrameGroundTruth& gt,
    const ElementFeatureFn& features);

struct TrainParams {
  int epochs = 200;
  double learning_rate = 0.5;
  int batch_size = 0;  // 0: full batch
  uint64_t seed = 0;   // shuffles mini-batches
};

// Gradient descent on mean binary cross-entropy from zero weights.
// `loss_history`, when given, receives the training loss before each epoch
// and once after the last.
LogisticScorer FitLogistic(std::span<const ActionnessSample> samples,
                           const TrainParams& params,
                           std::vector<double>* loss_history = nullptr);

double CrossEntropy(const LogisticScorer& scorer,
                    std::span<const ActionnessSample> samples);

// samples_per_class[i] trains scorer i.
ActionnessClassifier TrainActionness(
    std::span<const std::vector<ActionnessSample>> samples_per_class,
    const TrainParams& params);

// Running median with edge replication; window must be odd and >= 1.
std::vector<double> MedianFilter(std::span<const double> scores, int window);

struct RefineParams {
  int window = 7;
  double tau = 0.5;
  int min_seg_len = 2;

  void Validate() const;
};

// Smooths `actionness` (aligned with tube.elements), drops elements whose
// smoothed score is below tau, and returns the surviving maximal contiguous
// runs of at least min_seg_len elements as separate tubes.
std::vector<ActionTube> RefineTube(const ActionTube& tube,
                                   std::span<const double> actionness,
                                   const RefineParams& params);

std::vector<ActionTube> RefineTube(const ActionTube& tube,
                                   const ActionnessClassifier& classifier,
                                   std::span<const std::vector<double>> features,
                                   const RefineParams& params);

}  // namespace pcsc
