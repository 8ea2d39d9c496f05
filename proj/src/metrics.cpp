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

#include "wavclass/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "wavclass/error.hpp"
#include "wavclass/rng.hpp"

namespace wvc {

double probit(double p) {
  // AS 241 (Wichura 1988), the PPND16 variant.
  if (p <= 0.0 || p >= 1.0) throw_config("probit argument must be in (0, 1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double ret;
  if (r <= 5.0) {
    r -= 1.6;
    ret = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    ret = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -ret : ret;
}

namespace {
constexpr double kDprimeClamp = 1e-12;
constexpr double kSqrt2 = 1.4142135623730950488;
}  // namespace

bool d_prime_clamped(double auc) {
  return auc < kDprimeClamp || auc > 1.0 - kDprimeClamp;
}

double d_prime(double auc) {
  if (auc < 0.0 || auc > 1.0) throw_config("auc must be in [0, 1]");
  const double clamped = std::clamp(auc, kDprimeClamp, 1.0 - kDprimeClamp);
  return kSqrt2 * probit(clamped);
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw_config("scores and labels must align");
  const size_t n = scores.size();
  size_t positives = 0;
  for (int l : labels) positives += l ? 1 : 0;
  if (positives == 0 || positives == n) throw_config("undefined AUC");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] < scores[b];
  });

  // Tie groups share their average rank.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n - positives));
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw_config("scores and labels must align");
  const size_t n = scores.size();
  size_t positives = 0;
  for (int l : labels) positives += l ? 1 : 0;
  if (positives == 0) throw_config("average precision needs a positive");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;  // deterministic tie-break by item id
  });

  double sum = 0.0;
  size_t hits = 0;
  for (size_t rank = 0; rank < n; ++rank) {
    if (labels[order[rank]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

std::vector<double> aggregate_clip(const std::vector<float>& patch_scores,
                                   int num_patches, int num_classes) {
  if (num_patches < 1) throw_data("no patches");
  if (patch_scores.size() != static_cast<size_t>(num_patches) * num_classes)
    throw_config("patch score matrix shape mismatch");
  std::vector<double> mean(static_cast<size_t>(num_classes), 0.0);
  for (int p = 0; p < num_patches; ++p) {
    const float* row = patch_scores.data() + static_cast<size_t>(p) * num_classes;
    for (int c = 0; c < num_classes; ++c) mean[static_cast<size_t>(c)] += row[c];
  }
  for (double& v : mean) v /= num_patches;
  return mean;
}

MetricsReport evaluate_scores(const std::vector<ClipScores>& clips,
                              const std::vector<std::set<int>>& clip_labels,
                              const std::vector<int>& label_ids) {
  if (clips.size() != clip_labels.size())
    throw_config("clips and labels must align");
  const int c_count = static_cast<int>(label_ids.size());
  MetricsReport report;
  report.vocab_size = c_count;

  double sum_auc = 0.0, sum_dp = 0.0, sum_ap = 0.0;
  int included = 0;
  for (int c = 0; c < c_count; ++c) {
    ClassMetrics cm;
    cm.label_id = label_ids[static_cast<size_t>(c)];
    std::vector<double> scores(clips.size());
    std::vector<int> labels(clips.size());
    int positives = 0;
    for (size_t i = 0; i < clips.size(); ++i) {
      scores[i] = clips[i].mean_scores[static_cast<size_t>(c)];
      labels[i] = clip_labels[i].count(c) ? 1 : 0;
      positives += labels[i];
    }
    cm.positives = positives;
    cm.prior = clips.empty() ? 0.0
                             : static_cast<double>(positives) /
                                   static_cast<double>(clips.size());
    if (positives == 0) {
      cm.excluded = true;
      cm.exclusion_reason = "no positives";
    } else if (positives == static_cast<int>(clips.size())) {
      cm.excluded = true;
      cm.exclusion_reason = "no negatives";
    } else {
      cm.auc = roc_auc(scores, labels);
      cm.dprime = d_prime(cm.auc);
      cm.dprime_clamped = d_prime_clamped(cm.auc);
      cm.average_precision = average_precision(scores, labels);
      sum_auc += cm.auc;
      sum_dp += cm.dprime;
      sum_ap += cm.average_precision;
      ++included;
    }
    report.per_class.push_back(std::move(cm));
  }
  std::sort(report.per_class.begin(), report.per_class.end(),
            [](const ClassMetrics& a, const ClassMetrics& b) {
              return a.label_id < b.label_id;
            });
  report.evaluated_classes = included;
  if (included > 0) {
    report.balanced_auc = sum_auc / included;
    report.balanced_dprime = sum_dp / included;
    report.balanced_map = sum_ap / included;
  }
  return report;
}

double one_best_accuracy(const std::vector<ClipScores>& clips,
                         const std::vector<std::set<int>>& clip_labels,
                         const std::vector<int>& label_ids) {
  if (clips.empty()) throw_config("validation set is empty");
  size_t correct = 0;
  for (size_t i = 0; i < clips.size(); ++i) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(label_ids.size()); ++c) {
      const double s = clips[i].mean_scores[static_cast<size_t>(c)];
      const double sb = clips[i].mean_scores[static_cast<size_t>(best)];
      if (s > sb || (s == sb && label_ids[static_cast<size_t>(c)] <
                                    label_ids[static_cast<size_t>(best)]))
        best = c;
    }
    if (clip_labels[i].count(best)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(clips.size());
}

BalancedEvalSet build_balanced_eval(const std::vector<std::set<int>>& clip_labels,
                                    const std::vector<int>& label_ids,
                                    int per_class, uint64_t seed) {
  if (per_class < 1) throw_config("per_class must be >= 1");
  BalancedEvalSet out;
  out.per_class_target = per_class;
  Rng rng(seed, "balanced-eval");
  std::set<int> chosen;
  for (int c = 0; c < static_cast<int>(label_ids.size()); ++c) {
    std::vector<int> pos;
    for (size_t i = 0; i < clip_labels.size(); ++i)
      if (clip_labels[i].count(c)) pos.push_back(static_cast<int>(i));
    // Fisher-Yates with the shared stream; classes processed in id order.
    for (size_t i = pos.size(); i > 1; --i)
      std::swap(pos[i - 1], pos[rng.below(i)]);
    const int take = std::min<int>(per_class, static_cast<int>(pos.size()));
    for (int k = 0; k < take; ++k) chosen.insert(pos[static_cast<size_t>(k)]);
  }
  out.clip_indices.assign(chosen.begin(), chosen.end());
  for (int c = 0; c < static_cast<int>(label_ids.size()); ++c) {
    int realized = 0;
    for (int idx : out.clip_indices)
      if (clip_labels[static_cast<size_t>(idx)].count(c)) ++realized;
    out.realized_positives[label_ids[static_cast<size_t>(c)]] = realized;
  }
  return out;
}

namespace {
std::string fmt9(double v) {
  std::ostringstream s;
  s.precision(9);
  s << v;
  return s.str();
}
}  // namespace

std::string MetricsReport::per_class_csv() const {
  std::ostringstream out;
  out << "label,prior,positives,auc,dprime,ap\n";
  for (const ClassMetrics& cm : per_class) {
    out << cm.label_id << "," << fmt9(cm.prior) << "," << cm.positives << ",";
    if (cm.excluded)
      out << ",,";  // explicit blanks for excluded classes
    else
      out << fmt9(cm.auc) << "," << fmt9(cm.dprime) << ","
          << fmt9(cm.average_precision);
    out << "\n";
  }
  return out.str();
}

std::string MetricsReport::summary_json() const {
  nlohmann::json j;
  j["balanced_auc"] = balanced_auc;
  j["balanced_dprime"] = balanced_dprime;
  j["balanced_map"] = balanced_map;
  j["evaluated_classes"] = evaluated_classes;
  j["vocab_size"] = vocab_size;
  j["eval_descriptor"] = eval_descriptor;
  return j.dump(2);
}

std::string MetricsReport::scatter_csv() const {
  std::ostringstream out;
  out << "label,prior,d_prime,ap\n";
  for (const ClassMetrics& cm : per_class) {
    if (cm.excluded || cm.prior <= 0.0) continue;
    out << cm.label_id << "," << fmt9(cm.prior) << "," << fmt9(cm.dprime)
        << "," << fmt9(cm.average_precision) << "\n";
  }
  return out.str();
}

Timeline top_peak_timeline(const std::vector<float>& patch_scores,
                           int num_patches, int num_classes, int k,
                           double patch_seconds) {
  if (num_patches < 1) throw_data("no patches");
  if (patch_scores.size() != static_cast<size_t>(num_patches) * num_classes)
    throw_config("patch score matrix shape mismatch");
  std::vector<double> peak(static_cast<size_t>(num_classes), 0.0);
  for (int c = 0; c < num_classes; ++c) {
    double m = patch_scores[static_cast<size_t>(c)];
    for (int p = 1; p < num_patches; ++p)
      m = std::max(m, static_cast<double>(
                          patch_scores[static_cast<size_t>(p) * num_classes + c]));
    peak[static_cast<size_t>(c)] = m;
  }
  std::vector<int> order(static_cast<size_t>(num_classes));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (peak[static_cast<size_t>(a)] != peak[static_cast<size_t>(b)])
      return peak[static_cast<size_t>(a)] > peak[static_cast<size_t>(b)];
    return a < b;
  });
  const int take = std::min(k, num_classes);

  Timeline tl;
  tl.patch_seconds = patch_seconds;
  for (int i = 0; i < take; ++i) {
    const int c = order[static_cast<size_t>(i)];
    tl.classes.push_back(c);
    std::vector<double> series(static_cast<size_t>(num_patches));
    for (int p = 0; p < num_patches; ++p)
      series[static_cast<size_t>(p)] =
          patch_scores[static_cast<size_t>(p) * num_classes + c];
    tl.series.push_back(std::move(series));
  }
  return tl;
}

std::string Timeline::to_csv(const std::vector<std::string>& class_names) const {
  std::ostringstream out;
  out << "time_s,class,score\n";
  for (size_t i = 0; i < classes.size(); ++i) {
    const std::string name = classes[static_cast<size_t>(i)] <
                                     static_cast<int>(class_names.size())
                                 ? class_names[static_cast<size_t>(classes[i])]
                                 : std::to_string(classes[i]);
    for (size_t p = 0; p < series[i].size(); ++p)
      out << fmt9(static_cast<double>(p) * patch_seconds) << "," << name << ","
          << fmt9(series[i][p]) << "\n";
  }
  return out.str();
}

}  // namespace wvc
