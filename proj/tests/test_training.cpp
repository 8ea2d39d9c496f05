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

#include <cstring>
#include <filesystem>
#include <limits>
#include <map>
#include <set>

#include "wavclass/data.hpp"
#include "wavclass/trainer.hpp"
#include "wavclass/vocab.hpp"

using namespace wvc;

namespace {

// A store of low-dimensional synthetic "patches": two separable classes,
// class decided by the sign of feature 0.
PatchStore make_toy_store(int clips, int patches_per_clip, int dim,
                          uint64_t seed, const std::string& prefix = "toy") {
  Rng rng(seed);
  std::vector<LogMelPatch> patches;
  for (int c = 0; c < clips; ++c) {
    const int label = static_cast<int>(rng.below(2));
    for (int p = 0; p < patches_per_clip; ++p) {
      LogMelPatch lp;
      lp.clip_id = prefix + std::to_string(c);
      lp.patch_index = p;
      lp.labels = {label};
      lp.values.resize(static_cast<size_t>(dim));
      for (int d = 0; d < dim; ++d)
        lp.values[static_cast<size_t>(d)] =
            static_cast<float>(rng.normal(0.0, 0.3));
      lp.values[0] += label ? 2.0f : -2.0f;
      patches.push_back(std::move(lp));
    }
  }
  return store_from_patches(patches, dim);
}

ArchitectureSpec toy_mlp(int dim, int labels) {
  ArchitectureSpec spec = build_fully_connected(1, 8, labels);
  spec.input_shape = {1, dim, 1};
  return spec;
}

std::vector<int> all_clips(const PatchStore& store) {
  std::vector<int> v(static_cast<size_t>(store.num_clips()));
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
  return v;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("vocabulary ranking and restriction") {
  std::map<std::string, int64_t> counts;
  for (int i = 0; i < 8; ++i)
    counts["label" + std::to_string(i)] = 8 - i;  // frequencies 8..1
  const LabelVocabulary vocab = make_vocabulary(counts);
  CHECK(vocab.size() == 8);
  CHECK(vocab.entries[0].name == "label0");
  CHECK(vocab.entries[0].frequency == 8);

  const LabelVocabulary top3 = restrict_vocabulary(vocab, 3);
  REQUIRE(top3.size() == 3);
  CHECK(top3.entries[0].name == "label0");
  CHECK(top3.entries[1].name == "label1");
  CHECK(top3.entries[2].name == "label2");

  const LabelVocabulary same = restrict_vocabulary(vocab, 8);
  CHECK(same.size() == vocab.size());

  CHECK_THROWS_WITH_AS(restrict_vocabulary(vocab, 0),
                       doctest::Contains("top_k out of range"), Error);
  CHECK_THROWS_AS(restrict_vocabulary(vocab, 9), Error);

  SUBCASE("ties rank by ascending id") {
    std::map<std::string, int64_t> tied{{"a", 5}, {"b", 5}, {"c", 9}};
    const LabelVocabulary v = make_vocabulary(tied);
    CHECK(v.entries[0].name == "c");
    CHECK(v.entries[1].label_id < v.entries[2].label_id);
  }

  SUBCASE("csv round trip") {
    const std::string path = temp_path("vocab_test.csv");
    write_vocabulary(path, vocab);
    const LabelVocabulary back = read_vocabulary(path);
    REQUIRE(back.size() == vocab.size());
    for (int i = 0; i < vocab.size(); ++i) {
      CHECK(back.entries[static_cast<size_t>(i)].name ==
            vocab.entries[static_cast<size_t>(i)].name);
      CHECK(back.entries[static_cast<size_t>(i)].frequency ==
            vocab.entries[static_cast<size_t>(i)].frequency);
    }
    std::filesystem::remove(path);
  }
}

TEST_CASE("training pool projection and weak-label inheritance") {
  Rng rng(40);
  std::vector<LogMelPatch> patches;
  for (int c = 0; c < 30; ++c) {
    std::set<int> labels;
    for (int l = 0; l < 6; ++l)
      if (rng.uniform() < 0.3) labels.insert(l);
    if (labels.empty()) labels.insert(static_cast<int>(rng.below(6)));
    const int count = 1 + static_cast<int>(rng.below(4));
    for (int p = 0; p < count; ++p) {
      LogMelPatch lp;
      lp.clip_id = "clip" + std::to_string(c);
      lp.patch_index = p;
      lp.labels = labels;
      lp.values.assign(8, 0.0f);
      patches.push_back(std::move(lp));
    }
  }
  const PatchStore store = store_from_patches(patches, 8);
  const std::vector<int> active = {1, 3, 5};  // restricted vocabulary
  const DatasetView view = make_view(store, all_clips(store), active);
  const TrainPool pool = make_train_pool(view);

  // every sampled target equals the parent clip's projected label set
  Rng srng(7);
  Minibatch batch;
  for (int rep = 0; rep < 200; ++rep) {
    sample_minibatch(pool, 16, srng, &batch);
    for (int i = 0; i < batch.size; ++i) {
      const int pid = batch.patch_ids[static_cast<size_t>(i)];
      const auto& clip =
          store.clips[static_cast<size_t>(store.meta[static_cast<size_t>(pid)].clip)];
      for (size_t c = 0; c < active.size(); ++c) {
        const float expect = clip.label_ids.count(active[c]) ? 1.0f : 0.0f;
        CHECK(batch.targets[static_cast<size_t>(i) * active.size() + c] == expect);
      }
    }
  }

  // clips that keep no labels under the vocabulary never enter the pool
  for (int pid : pool.patches) {
    const auto& clip =
        store.clips[static_cast<size_t>(store.meta[static_cast<size_t>(pid)].clip)];
    bool any = false;
    for (int a : active) any |= clip.label_ids.count(a) > 0;
    CHECK(any);
  }
}

TEST_CASE("minibatch sampling is uniform over patches") {
  // 4 clips with patch counts 1, 2, 7, 10 -> selection proportional to size.
  std::vector<LogMelPatch> patches;
  const int counts[4] = {1, 2, 7, 10};
  for (int c = 0; c < 4; ++c)
    for (int p = 0; p < counts[c]; ++p) {
      LogMelPatch lp;
      lp.clip_id = "c" + std::to_string(c);
      lp.patch_index = p;
      lp.labels = {0};
      lp.values.assign(4, 0.0f);
      patches.push_back(std::move(lp));
    }
  const PatchStore store = store_from_patches(patches, 4);
  const DatasetView view = make_view(store, all_clips(store), {0});
  const TrainPool pool = make_train_pool(view);

  Rng srng(42);
  Minibatch batch;
  std::vector<int64_t> clip_hits(4, 0);
  const int64_t draws = 1000000;
  for (int64_t done = 0; done < draws; done += 128) {
    sample_minibatch(pool, 128, srng, &batch);
    for (int pid : batch.patch_ids)
      clip_hits[static_cast<size_t>(store.meta[static_cast<size_t>(pid)].clip)] += 1;
  }
  // chi-square against patch-count proportions; dof 3, p=0.001 cutoff 16.27
  double chi2 = 0;
  for (int c = 0; c < 4; ++c) {
    const double expect = static_cast<double>(draws) * counts[c] / 20.0;
    const double d = static_cast<double>(clip_hits[static_cast<size_t>(c)]) - expect;
    chi2 += d * d / expect;
  }
  INFO("chi2 ", chi2);
  CHECK(chi2 < 16.27);
  // the 10-patch clip is sampled ~10x the 1-patch clip
  const double ratio =
      static_cast<double>(clip_hits[3]) / static_cast<double>(clip_hits[0]);
  CHECK(ratio > 9.0);
  CHECK(ratio < 11.0);

  SUBCASE("fixed seed reproduces the batch sequence") {
    Rng r1(9), r2(9);
    Minibatch b1, b2;
    for (int i = 0; i < 5; ++i) {
      sample_minibatch(pool, 32, r1, &b1);
      sample_minibatch(pool, 32, r2, &b2);
      CHECK(b1.patch_ids == b2.patch_ids);
    }
    CHECK(b1.inputs.size() == 32u * 4);
    CHECK(b1.targets.size() == 32u * 1);
  }
}

TEST_CASE("lr schedule") {
  TrainConfig cfg;
  cfg.learning_rate = 3e-5;
  cfg.max_steps = 2000;
  SUBCASE("constant when decay disabled") {
    cfg.lr_decay_step = 0;
    CHECK(lr_schedule(0, cfg) == 3e-5);
    CHECK(lr_schedule(1999, cfg) == 3e-5);
  }
  SUBCASE("drops by the factor at the decay step") {
    cfg.lr_decay_step = 1000;
    CHECK(lr_schedule(999, cfg) == doctest::Approx(3e-5));
    CHECK(lr_schedule(1000, cfg) == doctest::Approx(3e-6));
    CHECK(lr_schedule(1500, cfg) == doctest::Approx(3e-6));
  }
  SUBCASE("configs at the published operating point are accepted") {
    cfg.max_steps = 17000000;
    cfg.lr_decay_step = 13000000;
    CHECK_NOTHROW(cfg.validate());
    CHECK(lr_schedule(13000000, cfg) == doctest::Approx(3e-6));
  }
}

TEST_CASE("training reduces loss on separable data; tiny lr freezes weights") {
  const PatchStore store = make_toy_store(40, 3, 16, 50);
  const DatasetView view = make_view(store, all_clips(store), {0, 1});
  const TrainPool pool = make_train_pool(view);

  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  cfg.max_steps = 200;
  cfg.seed = 11;
  Model model = build_model(toy_mlp(16, 2), cfg.seed);
  Trainer trainer(model, cfg);

  double first = 0, last = 0;
  for (int s = 0; s < 200; ++s) {
    const double loss = trainer.train_step(pool);
    if (s < 10) first += loss;
    if (s >= 190) last += loss;
  }
  CHECK(trainer.step() == 200);
  CHECK(last / 10 < 0.5 * (first / 10));

  SUBCASE("effectively-zero learning rate leaves parameters unchanged") {
    TrainConfig frozen = cfg;
    frozen.learning_rate = 1e-30;
    Model m2 = build_model(toy_mlp(16, 2), 3);
    std::vector<float> before;
    for (Parameter<float>* p : m2.net.parameters())
      before.insert(before.end(), p->value.values.begin(), p->value.values.end());
    Trainer t2(m2, frozen);
    t2.train_step(pool);
    std::vector<float> after;
    for (Parameter<float>* p : m2.net.parameters())
      after.insert(after.end(), p->value.values.begin(), p->value.values.end());
    for (size_t i = 0; i < before.size(); ++i)
      CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
  }
}

TEST_CASE("validation metrics share the evaluation code path") {
  const PatchStore store = make_toy_store(24, 2, 16, 52);
  const DatasetView view = make_view(store, all_clips(store), {0, 1});
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-2;
  cfg.max_steps = 300;
  cfg.seed = 5;
  Model model = build_model(toy_mlp(16, 2), cfg.seed);
  Trainer trainer(model, cfg);
  const TrainPool pool = make_train_pool(view);
  for (int i = 0; i < 300; ++i) trainer.train_step(pool);

  const ValidationResult v = trainer.validate(view);
  const std::vector<ClipScores> scores = score_clips(model, view);
  const MetricsReport report =
      evaluate_scores(scores, view.positions, view.label_ids);
  CHECK(v.mean_average_precision == doctest::Approx(report.balanced_map));
  CHECK(v.one_best_accuracy ==
        doctest::Approx(one_best_accuracy(scores, view.positions, view.label_ids)));
  CHECK(v.one_best_accuracy > 0.9);  // separable toy data
}

TEST_CASE("checkpoint round trip, digest guard, and bit-identical resume") {
  const PatchStore store = make_toy_store(30, 2, 16, 53);
  const DatasetView view = make_view(store, all_clips(store), {0, 1});
  const TrainPool pool = make_train_pool(view);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-3;
  cfg.max_steps = 10;
  cfg.seed = 21;

  // Uninterrupted run A.
  Model ma = build_model(toy_mlp(16, 2), cfg.seed);
  Trainer ta(ma, cfg);
  for (int i = 0; i < 10; ++i) ta.train_step(pool);

  // Run B: 5 steps, checkpoint, fresh trainer resumes, 5 more.
  const std::string path = temp_path("wvc_resume.wck");
  Model mb = build_model(toy_mlp(16, 2), cfg.seed);
  {
    Trainer tb(mb, cfg);
    for (int i = 0; i < 5; ++i) tb.train_step(pool);
    tb.save(path);
  }
  Model mc = build_model(toy_mlp(16, 2), 999);  // wrong init, overwritten by load
  Trainer tc(mc, cfg);
  tc.resume(path);
  CHECK(tc.step() == 5);
  for (int i = 0; i < 5; ++i) tc.train_step(pool);

  const auto& pa = ma.net.parameters();
  const auto& pc = mc.net.parameters();
  REQUIRE(pa.size() == pc.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->value.numel() == pc[i]->value.numel());
    CHECK(std::memcmp(pa[i]->value.data(), pc[i]->value.data(),
                      pa[i]->value.numel() * sizeof(float)) == 0);
  }

  SUBCASE("architecture digest mismatch is rejected") {
    Model other = build_model(toy_mlp(16, 3), 1);
    CHECK_THROWS_WITH_AS(load_checkpoint(path, other),
                         doctest::Contains("digest mismatch"), Error);
  }
  SUBCASE("plain parameter round trip") {
    Model m2 = build_model(toy_mlp(16, 2), 77);
    save_checkpoint(temp_path("wvc_plain.wck"), m2);
    Model m3 = build_model(toy_mlp(16, 2), 78);
    load_checkpoint(temp_path("wvc_plain.wck"), m3);
    for (size_t i = 0; i < m2.net.parameters().size(); ++i)
      CHECK(std::memcmp(m2.net.parameters()[i]->value.data(),
                        m3.net.parameters()[i]->value.data(),
                        m2.net.parameters()[i]->value.numel() * sizeof(float)) == 0);
    std::filesystem::remove(temp_path("wvc_plain.wck"));
  }
  std::filesystem::remove(path);
}

TEST_CASE("clip split is deterministic and respects fractions") {
  const PatchStore store = make_toy_store(100, 1, 4, 54);
  const SplitIndices a = split_clips(store, 0.1, 0.2, 42);
  const SplitIndices b = split_clips(store, 0.1, 0.2, 42);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.eval == b.eval);
  CHECK(a.val.size() == 10);
  CHECK(a.eval.size() == 20);
  CHECK(a.train.size() == 70);
  std::set<int> seen(a.train.begin(), a.train.end());
  seen.insert(a.val.begin(), a.val.end());
  seen.insert(a.eval.begin(), a.eval.end());
  CHECK(seen.size() == 100);
  CHECK_THROWS_AS(split_clips(store, 0.6, 0.5, 1), Error);
}

TEST_CASE("non-finite loss aborts with step and batch diagnostics") {
  const PatchStore store = make_toy_store(10, 1, 8, 55);
  const DatasetView view = make_view(store, all_clips(store), {0, 1});
  const TrainPool pool = make_train_pool(view);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 5;
  cfg.seed = 2;
  Model model = build_model(toy_mlp(8, 2), 2);
  // poison the output head; anything earlier gets squashed by relu
  for (Parameter<float>* p : model.net.parameters())
    if (p->name == "logits.weight")
      p->value.values[0] = std::numeric_limits<float>::quiet_NaN();
  Trainer trainer(model, cfg);
  CHECK_THROWS_WITH_AS(trainer.train_step(pool),
                       doctest::Contains("non-finite loss at step"), Error);
}
