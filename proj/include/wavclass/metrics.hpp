/* Copyright 2026 The WavClass Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef WAVCLASS_METRICS_HPP_
#define WAVCLASS_METRICS_HPP_

#include <cstdint>

#include "wavclass/error.hpp"
#include <map>
#include <set>
#include <string>
#include <vector>

namespace wvc {

// Inverse standard-normal CDF (Wichura's AS 241 rational approximation;
// absolute error well under 1e-9 across the clamped range).
double probit(double p);

// sqrt(2) * probit(auc), with auc clamped to [1e-12, 1 - 1e-12] so the
// endpoints map to finite values (about +/-9.9) instead of infinities.
double d_prime(double auc);
bool d_prime_clamped(double auc);  // true when the clamp was active

// P(score_pos > score_neg) + 0.5 P(tie) via the rank statistic.
// Throws "undefined AUC" unless both classes are present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean of precision at each positive's rank, scores descending, ties broken
// by ascending item index. Throws unless at least one positive is present.
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels);

// Arithmetic mean over patches per class; patch_scores is [P x C] row-major.
std::vector<double> aggregate_clip(const std::vector<float>& patch_scores,
                                   int num_patches, int num_classes);

struct ClassMetrics {
  int label_id = -1;
  double prior = 0.0;
  double auc = 0.0;
  double dprime = 0.0;
  double average_precision = 0.0;
  int positives = 0;
  bool dprime_clamped = false;
  bool excluded = false;
  std::string exclusion_reason;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;  // ordered by label id
  double balanced_auc = 0.0;
  double balanced_dprime = 0.0;
  double balanced_map = 0.0;
  int evaluated_classes = 0;
  int vocab_size = 0;
  std::string eval_descriptor;

  std::string per_class_csv() const;  // label,prior,positives,auc,dprime,ap
  std::string summary_json() const;
  // Figure data: one row per class, label,prior,d_prime,ap at 9 significant
  // digits, priors over the evaluation population.
  std::string scatter_csv() const;
};

// A clip's aggregated scores over the active vocabulary.
struct ClipScores {
  std::string clip_id;
  std::vector<double> mean_scores;  // [C]
};

// Per-class metrics and unweighted balanced means over clip-level scores.
// clip_labels[i] holds vocabulary *positions* (0..C-1) for clips[i];
// label_ids maps positions to label ids.
MetricsReport evaluate_scores(const std::vector<ClipScores>& clips,
                              const std::vector<std::set<int>>& clip_labels,
                              const std::vector<int>& label_ids);

// Fraction of clips whose argmax class (ties to the lowest label id) is in
// the clip's label set.
double one_best_accuracy(const std::vector<ClipScores>& clips,
                         const std::vector<std::set<int>>& clip_labels,
                         const std::vector<int>& label_ids);

// Seeded balanced evaluation subset: targets per_class positive clips per
// label; classes with fewer contribute all of them; every selected clip
// serves as a negative for its non-labels. Returns ascending clip indices.
struct BalancedEvalSet {
  std::vector<int> clip_indices;
  std::map<int, int> realized_positives;  // label id -> positive count
  int per_class_target = 33;
};

BalancedEvalSet build_balanced_eval(const std::vector<std::set<int>>& clip_labels,
                                    const std::vector<int>& label_ids,
                                    int per_class, uint64_t seed);

// Classes with the greatest per-patch peak over a clip, with their full
// score series. patch_scores is [P x C]; k > C selects all classes.
struct Timeline {
  std::vector<int> classes;               // by descending peak, index tie-break
  std::vector<std::vector<double>> series;  // parallel to classes, length P
  double patch_seconds = 0.96;

  std::string to_csv(const std::vector<std::string>& class_names) const;
};

Timeline top_peak_timeline(const std::vector<float>& patch_scores,
                           int num_patches, int num_classes, int k = 16,
                           double patch_seconds = 0.96);

}  // namespace wvc

#endif  // WAVCLASS_METRICS_HPP_
