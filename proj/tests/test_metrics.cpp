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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "wavclass/metrics.hpp"
#include "wavclass/rng.hpp"

using namespace wvc;

namespace {

// Pair-counting oracle: P(pos > neg) + half credit for ties.
double auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0, pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Rank-enumeration oracle with the same deterministic tie-break (item id).
double ap_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  const size_t n = scores.size();
  double sum = 0;
  int positives = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!labels[i]) continue;
    ++positives;
    size_t rank = 1, hits = 0;
    for (size_t j = 0; j < n; ++j) {
      const bool ahead = scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
      if (j != i && ahead) {
        ++rank;
        if (labels[j]) ++hits;
      }
    }
    sum += static_cast<double>(hits + 1) / static_cast<double>(rank);
  }
  return sum / positives;
}

}  // namespace

TEST_CASE("probit accuracy against reference quantiles") {
  CHECK(std::fabs(probit(0.5)) < 1e-12);
  CHECK(probit(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
  CHECK(probit(0.9) == doctest::Approx(1.2815515655446004).epsilon(1e-10));
  CHECK(probit(0.0013498980316300945) == doctest::Approx(-3.0).epsilon(1e-9));
  CHECK(probit(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-8));
}

TEST_CASE("d-prime reproduces the published AUC pairs within 0.02") {
  const double pairs[8][2] = {{0.851, 1.471}, {0.894, 1.764}, {0.911, 1.909},
                              {0.918, 1.969}, {0.916, 1.952}, {0.926, 2.041},
                              {0.904, 1.846}, {0.959, 2.452}};
  for (const auto& p : pairs) {
    INFO("auc ", p[0]);
    CHECK(std::fabs(d_prime(p[0]) - p[1]) <= 0.02);
  }
  CHECK(d_prime(0.5) == doctest::Approx(0.0));
}

TEST_CASE("d-prime antisymmetry and endpoint clamping") {
  for (double a : {0.51, 0.6, 0.75, 0.9, 0.99, 0.999999}) {
    CHECK(d_prime(1.0 - a) == doctest::Approx(-d_prime(a)).epsilon(1e-9));
  }
  // endpoints map to finite ~ +/-9.9 rather than infinities
  CHECK(std::isfinite(d_prime(1.0)));
  CHECK(d_prime(1.0) == doctest::Approx(9.9).epsilon(0.01));
  CHECK(d_prime(0.0) == doctest::Approx(-9.9).epsilon(0.01));
  CHECK(d_prime_clamped(1.0));
  CHECK(!d_prime_clamped(0.97));
}

TEST_CASE("roc_auc examples and error cases") {
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(roc_auc({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0}) == doctest::Approx(0.5));
  // pos {0.9, 0.4}, neg {0.5, 0.1}: 3 wins of 4 pairs
  CHECK(roc_auc({0.9, 0.4, 0.5, 0.1}, {1, 1, 0, 0}) == doctest::Approx(0.75));
  CHECK_THROWS_WITH_AS(roc_auc({0.1, 0.2}, {1, 1}),
                       doctest::Contains("undefined AUC"), Error);
}

TEST_CASE("auc and ap match brute-force oracles on random fixtures") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(199));
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      // coarse quantization forces plenty of ties
      scores[static_cast<size_t>(i)] = std::floor(rng.uniform() * 8.0) / 8.0;
      labels[static_cast<size_t>(i)] = rng.uniform() < 0.3 ? 1 : 0;
      pos += labels[static_cast<size_t>(i)];
    }
    if (pos == 0) labels[0] = 1, ++pos;
    if (pos == n) labels[0] = 0, --pos;
    CHECK(roc_auc(scores, labels) == doctest::Approx(auc_oracle(scores, labels)).epsilon(1e-12));
    CHECK(average_precision(scores, labels) ==
          doctest::Approx(ap_oracle(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("auc is invariant under strictly monotone score transforms") {
  Rng rng(32);
  std::vector<double> scores(60);
  std::vector<int> labels(60);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform();
    labels[i] = rng.uniform() < 0.4 ? 1 : 0;
  }
  labels[0] = 1;
  labels[1] = 0;
  const double base = roc_auc(scores, labels);
  std::vector<double> warped = scores;
  for (double& s : warped) s = std::exp(3.0 * s) - 0.5;
  CHECK(roc_auc(warped, labels) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("average precision examples") {
  // all positives ranked first
  CHECK(average_precision({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  // positives at ranks 1 and 3 -> (1/1 + 2/3)/2
  CHECK(average_precision({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}) ==
        doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK_THROWS_AS(average_precision({0.5, 0.4}, {0, 0}), Error);
}

TEST_CASE("ap of a random ranking approximates the class prior") {
  // The bias of AP toward values above the prior shrinks as the list grows;
  // 400 items keeps the Monte Carlo mean within the 0.02 window.
  Rng rng(33);
  const int n = 400;
  for (double prior : {0.1, 0.3}) {
    std::vector<int> labels(static_cast<size_t>(n), 0);
    const int pos = static_cast<int>(n * prior);
    for (int i = 0; i < pos; ++i) labels[static_cast<size_t>(i)] = 1;
    double mean_ap = 0;
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
      std::vector<double> scores(static_cast<size_t>(n));
      for (double& s : scores) s = rng.uniform();
      mean_ap += average_precision(scores, labels);
    }
    mean_ap /= trials;
    CHECK(std::fabs(mean_ap - prior) < 0.02);
  }
}

TEST_CASE("clip aggregation is a patch mean") {
  // single patch -> identity
  const std::vector<float> one = {0.2f, 0.7f};
  const std::vector<double> m1 = aggregate_clip(one, 1, 2);
  CHECK(m1[0] == doctest::Approx(0.2));
  CHECK(m1[1] == doctest::Approx(0.7));

  const std::vector<float> two = {0.2f, 0.8f};
  CHECK(aggregate_clip(two, 2, 1)[0] == doctest::Approx(0.5));

  // permutation invariance
  Rng rng(34);
  std::vector<float> mat(5 * 3);
  for (float& v : mat) v = rng.uniform_float();
  std::vector<float> perm = mat;
  std::swap_ranges(perm.begin(), perm.begin() + 3, perm.begin() + 6);
  const auto a = aggregate_clip(mat, 5, 3);
  const auto b = aggregate_clip(perm, 5, 3);
  for (int c = 0; c < 3; ++c) CHECK(a[static_cast<size_t>(c)] == doctest::Approx(b[static_cast<size_t>(c)]));

  CHECK_THROWS_WITH_AS(aggregate_clip({}, 0, 2), doctest::Contains("no patches"), Error);
}

TEST_CASE("balanced eval selection rules") {
  Rng rng(35);
  std::vector<std::set<int>> clip_labels;
  // class 0: 50 positives, class 1: 10 positives, class 2: 60 positives
  for (int i = 0; i < 50; ++i) clip_labels.push_back({0});
  for (int i = 0; i < 10; ++i) clip_labels.push_back({1});
  for (int i = 0; i < 60; ++i) clip_labels.push_back({2});
  const std::vector<int> ids = {100, 200, 300};

  const BalancedEvalSet set = build_balanced_eval(clip_labels, ids, 33, 7);
  CHECK(set.per_class_target == 33);
  CHECK(set.realized_positives.at(200) == 10);  // exhausted class contributes all
  CHECK(set.realized_positives.at(100) == 33);
  CHECK(set.realized_positives.at(300) == 33);
  CHECK(std::is_sorted(set.clip_indices.begin(), set.clip_indices.end()));

  const BalancedEvalSet again = build_balanced_eval(clip_labels, ids, 33, 7);
  CHECK(set.clip_indices == again.clip_indices);
  const BalancedEvalSet other = build_balanced_eval(clip_labels, ids, 33, 8);
  CHECK(set.clip_indices != other.clip_indices);
}

TEST_CASE("evaluate_scores equals per-class oracles on a 20-clip fixture") {
  Rng rng(36);
  const int clips_n = 20, classes_n = 3;
  std::vector<ClipScores> clips(static_cast<size_t>(clips_n));
  std::vector<std::set<int>> labels(static_cast<size_t>(clips_n));
  for (int i = 0; i < clips_n; ++i) {
    clips[static_cast<size_t>(i)].clip_id = "c" + std::to_string(i);
    for (int c = 0; c < classes_n; ++c)
      clips[static_cast<size_t>(i)].mean_scores.push_back(rng.uniform());
    for (int c = 0; c < classes_n; ++c)
      if (rng.uniform() < 0.35) labels[static_cast<size_t>(i)].insert(c);
  }
  // guarantee at least one positive and one negative per class
  labels[0] = {0, 1, 2};
  labels[1].clear();
  const std::vector<int> ids = {10, 20, 30};
  const MetricsReport report = evaluate_scores(clips, labels, ids);

  double sum_auc = 0, sum_dp = 0, sum_ap = 0;
  for (int c = 0; c < classes_n; ++c) {
    std::vector<double> scores;
    std::vector<int> y;
    int positives = 0;
    for (int i = 0; i < clips_n; ++i) {
      scores.push_back(clips[static_cast<size_t>(i)].mean_scores[static_cast<size_t>(c)]);
      y.push_back(labels[static_cast<size_t>(i)].count(c) ? 1 : 0);
      positives += y.back();
    }
    const double a = auc_oracle(scores, y);
    const double ap = ap_oracle(scores, y);
    const ClassMetrics& cm = report.per_class[static_cast<size_t>(c)];
    CHECK(cm.label_id == ids[static_cast<size_t>(c)]);
    CHECK(cm.auc == doctest::Approx(a).epsilon(1e-12));
    CHECK(cm.average_precision == doctest::Approx(ap).epsilon(1e-12));
    CHECK(cm.dprime == doctest::Approx(d_prime(a)).epsilon(1e-12));
    CHECK(cm.positives == positives);
    CHECK(cm.prior == doctest::Approx(positives / 20.0));
    sum_auc += a;
    sum_dp += d_prime(a);
    sum_ap += ap;
  }
  CHECK(report.balanced_auc == doctest::Approx(sum_auc / 3).epsilon(1e-12));
  CHECK(report.balanced_dprime == doctest::Approx(sum_dp / 3).epsilon(1e-12));
  CHECK(report.balanced_map == doctest::Approx(sum_ap / 3).epsilon(1e-12));
  CHECK(report.evaluated_classes == 3);
}

TEST_CASE("oracle and constant models hit the trivial bounds") {
  const int clips_n = 12;
  std::vector<ClipScores> oracle(static_cast<size_t>(clips_n)),
      constant(static_cast<size_t>(clips_n));
  std::vector<std::set<int>> labels(static_cast<size_t>(clips_n));
  for (int i = 0; i < clips_n; ++i) {
    if (i % 3 == 0) labels[static_cast<size_t>(i)].insert(0);
    if (i % 4 == 0) labels[static_cast<size_t>(i)].insert(1);
    for (int c = 0; c < 2; ++c) {
      oracle[static_cast<size_t>(i)].mean_scores.push_back(
          labels[static_cast<size_t>(i)].count(c) ? 1.0 : 0.0);
      constant[static_cast<size_t>(i)].mean_scores.push_back(0.5);
    }
  }
  const std::vector<int> ids = {0, 1};
  const MetricsReport r1 = evaluate_scores(oracle, labels, ids);
  CHECK(r1.balanced_auc == doctest::Approx(1.0));
  CHECK(r1.balanced_map == doctest::Approx(1.0));
  const MetricsReport r2 = evaluate_scores(constant, labels, ids);
  CHECK(r2.balanced_auc == doctest::Approx(0.5));
  CHECK(r2.balanced_dprime == doctest::Approx(0.0));
}

TEST_CASE("classes without positives are excluded and flagged") {
  std::vector<ClipScores> clips(4);
  std::vector<std::set<int>> labels(4);
  for (int i = 0; i < 4; ++i)
    clips[static_cast<size_t>(i)].mean_scores = {0.1 * i, 0.2};
  labels[0] = {0};
  const MetricsReport r = evaluate_scores(clips, labels, {5, 6});
  CHECK(r.evaluated_classes == 1);
  CHECK(r.per_class[1].excluded);
  CHECK(r.per_class[1].exclusion_reason == "no positives");
}

TEST_CASE("one-best accuracy with deterministic tie-break") {
  std::vector<ClipScores> clips(2);
  std::vector<std::set<int>> labels(2);
  clips[0].mean_scores = {0.9, 0.1};
  labels[0] = {0};
  clips[1].mean_scores = {0.4, 0.4};  // tie: lowest label id wins
  labels[1] = {1};
  CHECK(one_best_accuracy(clips, labels, {0, 1}) == doctest::Approx(0.5));
  labels[1] = {0};
  CHECK(one_best_accuracy(clips, labels, {0, 1}) == doctest::Approx(1.0));
}

TEST_CASE("timeline selection and export") {
  const int patches_n = 6, classes_n = 20;
  std::vector<float> scores(static_cast<size_t>(patches_n) * classes_n, 0.1f);
  // class 7 spikes in patches 3 and 4; class 2 modest everywhere
  scores[3 * classes_n + 7] = 0.95f;
  scores[4 * classes_n + 7] = 0.9f;
  for (int p = 0; p < patches_n; ++p) scores[static_cast<size_t>(p) * classes_n + 2] = 0.4f;

  Timeline tl = top_peak_timeline(scores, patches_n, classes_n, 16);
  REQUIRE(tl.classes.size() == 16);  // k=16 default fits under 20 classes
  CHECK(tl.classes[0] == 7);
  CHECK(tl.classes[1] == 2);
  int peak_at = 0;
  for (int p = 1; p < patches_n; ++p)
    if (tl.series[0][static_cast<size_t>(p)] > tl.series[0][static_cast<size_t>(peak_at)])
      peak_at = p;
  CHECK((peak_at == 3 || peak_at == 4));

  // k larger than class count selects everything
  Timeline all = top_peak_timeline(scores, patches_n, classes_n, 99);
  CHECK(all.classes.size() == static_cast<size_t>(classes_n));

  // single-patch clip: selection equals the top-k of that row
  std::vector<float> row(static_cast<size_t>(classes_n), 0.2f);
  row[11] = 0.8f;
  Timeline single = top_peak_timeline(row, 1, classes_n, 3);
  CHECK(single.classes[0] == 11);

  const std::string csv = tl.to_csv({});
  CHECK(csv.find("time_s,class,score") == 0);
  CHECK(csv.find("0.96,") != std::string::npos);  // second patch timestamp
}

TEST_CASE("scatter export carries one row per evaluated class") {
  std::vector<ClipScores> clips(6);
  std::vector<std::set<int>> labels(6);
  for (int i = 0; i < 6; ++i) {
    clips[static_cast<size_t>(i)].mean_scores = {0.1 * i, 0.05 * i, 0.3};
    if (i < 3) labels[static_cast<size_t>(i)].insert(0);
    if (i % 2 == 0) labels[static_cast<size_t>(i)].insert(1);
  }
  const MetricsReport r = evaluate_scores(clips, labels, {1, 2, 3});
  const std::string csv = r.scatter_csv();
  int rows = -1;  // discount the header
  for (char ch : csv)
    if (ch == '\n') ++rows;
  CHECK(rows == r.evaluated_classes);
  CHECK(csv.find("label,prior,d_prime,ap") == 0);
}
