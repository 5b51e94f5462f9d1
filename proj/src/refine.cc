// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/refine.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pcsc/error.h"

namespace pcsc {
namespace {

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double Logit(const LogisticScorer& s, std::span<const double> x) {
  double z = s.bias;
  for (size_t i = 0; i < s.weights.size(); ++i) z += s.weights[i] * x[i];
  return z;
}

}  // namespace

double LogisticScorer::Probability(std::span<const double> feature) const {
  if (degenerate) return base_rate;
  if (feature.size() != weights.size()) {
    throw StructuralError(fmt::format("feature has {} dims, scorer expects {}",
                                      feature.size(), weights.size()));
  }
  return Sigmoid(Logit(*this, feature));
}

const LogisticScorer& ActionnessClassifier::scorer(int class_id) const {
  if (class_id < 0 || class_id >= num_classes()) {
    throw ValidationError(fmt::format(
        "no actionness scorer for class {} ({} classes)", class_id,
        num_classes()));
  }
  return scorers_[class_id];
}

double ActionnessClassifier::Score(int class_id,
                                   std::span<const double> feature) const {
  return scorer(class_id).Probability(feature);
}

std::vector<ActionnessSample> BuildTrainingSet(
    std::span<const ActionTube> tubes, int class_id, const FrameGroundTruth& gt,
    const ElementFeatureFn& features) {
  std::vector<ActionnessSample> samples;
  for (const auto& tube : tubes) {
    if (tube.class_id != class_id) continue;
    for (size_t e = 0; e < tube.elements.size(); ++e) {
      const auto& el = tube.elements[e];
      int label = 0;
      if (auto it = gt.find(el.frame); it != gt.end()) {
        for (const auto& g : it->second) {
          if (g.class_id == class_id && Iou(g.box, el.box) > 0.5) {
            label = 1;
            break;
          }
        }
      }
      samples.push_back({features(tube, e), label});
    }
  }
  return samples;
}

double CrossEntropy(const LogisticScorer& scorer,
                    std::span<const ActionnessSample> samples) {
  if (samples.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& s : samples) {
    const double z = Logit(scorer, s.feature);
    // log(1 + exp(z)) - y*z, evaluated stably
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z))
                                  : std::log1p(std::exp(z));
    loss += softplus - s.label * z;
  }
  return loss / samples.size();
}

LogisticScorer FitLogistic(std::span<const ActionnessSample> samples,
                           const TrainParams& params,
                           std::vector<double>* loss_history) {
  LogisticScorer scorer;
  const size_t n = samples.size();
  const size_t positives = std::count_if(
      samples.begin(), samples.end(),
      [](const ActionnessSample& s) { return s.label == 1; });
  if (n == 0 || positives == 0 || positives == n) {
    scorer.degenerate = true;
    scorer.base_rate = n == 0 ? 0.5 : static_cast<double>(positives) / n;
    return scorer;
  }
  const size_t dim = samples.front().feature.size();
  for (const auto& s : samples) {
    if (s.feature.size() != dim) {
      throw StructuralError("actionness samples have inconsistent dimensions");
    }
    if (s.label != 0 && s.label != 1) {
      throw ValidationError("actionness labels must be 0 or 1");
    }
  }
  scorer.weights.assign(dim, 0.0);
  scorer.base_rate = static_cast<double>(positives) / n;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(params.seed);
  const size_t batch =
      params.batch_size > 0 ? static_cast<size_t>(params.batch_size) : n;

  std::vector<double> gw(dim);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    if (loss_history) loss_history->push_back(CrossEntropy(scorer, samples));
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < n; start += batch) {
      const size_t stop = std::min(n, start + batch);
      std::fill(gw.begin(), gw.end(), 0.0);
      double gb = 0.0;
      for (size_t k = start; k < stop; ++k) {
        const auto& s = samples[order[k]];
        const double r = Sigmoid(Logit(scorer, s.feature)) - s.label;
        for (size_t i = 0; i < dim; ++i) gw[i] += r * s.feature[i];
        gb += r;
      }
      const double scale = params.learning_rate / (stop - start);
      for (size_t i = 0; i < dim; ++i) scorer.weights[i] -= scale * gw[i];
      scorer.bias -= scale * gb;
    }
  }
  if (loss_history) loss_history->push_back(CrossEntropy(scorer, samples));
  return scorer;
}

ActionnessClassifier TrainActionness(
    std::span<const std::vector<ActionnessSample>> samples_per_class,
    const TrainParams& params) {
  std::vector<LogisticScorer> scorers;
  scorers.reserve(samples_per_class.size());
  for (const auto& samples : samples_per_class) {
    scorers.push_back(FitLogistic(samples, params));
  }
  return ActionnessClassifier(std::move(scorers));
}

std::vector<double> MedianFilter(std::span<const double> scores, int window) {
  if (window < 1 || window % 2 == 0) {
    throw ValidationError(
        fmt::format("median window must be odd and >= 1, got {}", window));
  }
  const int n = static_cast<int>(scores.size());
  const int half = window / 2;
  std::vector<double> out(n);
  std::vector<double> buf(window);
  for (int i = 0; i < n; ++i) {
    for (int k = -half; k <= half; ++k) {
      buf[k + half] = scores[std::clamp(i + k, 0, n - 1)];
    }
    std::nth_element(buf.begin(), buf.begin() + half, buf.end());
    out[i] = buf[half];
  }
  return out;
}

void RefineParams::Validate() const {
  if (window < 1 || window % 2 == 0) {
    throw ValidationError("refine.window must be odd and >= 1");
  }
  if (min_seg_len < 1) throw ValidationError("refine.min_seg_len must be >= 1");
}

std::vector<ActionTube> RefineTube(const ActionTube& tube,
                                   std::span<const double> actionness,
                                   const RefineParams& params) {
  params.Validate();
  if (actionness.size() != tube.elements.size()) {
    throw StructuralError(fmt::format(
        "tube has {} elements but {} actionness scores",
        tube.elements.size(), actionness.size()));
  }
  std::vector<ActionTube> out;
  if (tube.elements.empty()) return out;
  const auto smoothed = MedianFilter(actionness, params.window);

  ActionTube run{tube.video_id, tube.class_id, {}, 0.0};
  auto flush = [&] {
    if (static_cast<int>(run.elements.size()) >= params.min_seg_len) {
      run.score = TubeScore(run);
      out.push_back(run);
    }
    run.elements.clear();
  };
  for (size_t i = 0; i < tube.elements.size(); ++i) {
    if (smoothed[i] < params.tau) {
      flush();
    } else {
      run.elements.push_back(tube.elements[i]);
    }
  }
  flush();
  return out;
}

std::vector<ActionTube> RefineTube(const ActionTube& tube,
                                   const ActionnessClassifier& classifier,
                                   std::span<const std::vector<double>> features,
                                   const RefineParams& params) {
  if (features.size() != tube.elements.size()) {
    throw StructuralError(fmt::format(
        "tube has {} elements but {} feature vectors", tube.elements.size(),
        features.size()));
  }
  std::vector<double> scores;
  scores.reserve(features.size());
  for (const auto& f : features) scores.push_back(classifier.Score(tube.class_id, f));
  return RefineTube(tube, scores, params);
}

}  // namespace pcsc
