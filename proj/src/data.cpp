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

#include "wavclass/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "wavclass/wav.hpp"

namespace wvc {

using nlohmann::json;

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open manifest: " + path);
  std::vector<ManifestRecord> records;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw_data("bad manifest line: " + std::string(e.what()));
    }
    ManifestRecord rec;
    rec.clip_id = j.at("clip_id").get<std::string>();
    rec.path = j.at("path").get<std::string>();
    for (const auto& l : j.at("labels")) rec.labels.push_back(l.get<std::string>());
    if (!seen.insert(rec.clip_id).second)
      throw_data("duplicate clip_id in manifest: " + rec.clip_id);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_data("cannot write manifest: " + path);
  for (const ManifestRecord& rec : records) {
    json j;
    j["clip_id"] = rec.clip_id;
    j["path"] = rec.path;
    j["labels"] = rec.labels;
    out << j.dump() << "\n";
  }
}

PatchStore featurize_manifest(const std::vector<ManifestRecord>& records,
                              const LabelVocabulary& vocab,
                              const FrontendConfig& cfg) {
  std::vector<LogMelPatch> all;
  for (const ManifestRecord& rec : records) {
    WaveformClip clip;
    clip.clip_id = rec.clip_id;
    const WavData wav = read_wav(rec.path);
    clip.sample_rate_hz = wav.sample_rate_hz;
    clip.samples = wav.samples;
    for (const std::string& name : rec.labels) {
      const VocabEntry* e = vocab.find_by_name(name);
      if (!e) throw_data("label '" + name + "' not in vocabulary (clip " +
                         rec.clip_id + ")");
      clip.labels.insert(e->label_id);
    }
    validate_clip(clip, /*require_labels=*/true);
    for (LogMelPatch& p : extract_patches(clip, cfg)) all.push_back(std::move(p));
  }
  return store_from_patches(all, cfg.patch_frames * cfg.mel_bands);
}

PatchStore store_from_patches(const std::vector<LogMelPatch>& patches, int dim) {
  PatchStore store;
  store.dim = dim;
  store.features.reserve(patches.size() * static_cast<size_t>(dim));
  for (const LogMelPatch& p : patches) {
    if (p.values.size() != static_cast<size_t>(dim))
      throw_data("patch dimension mismatch for clip " + p.clip_id);
    int clip_idx;
    if (!store.clips.empty() && store.clips.back().clip_id == p.clip_id) {
      clip_idx = store.num_clips() - 1;
    } else {
      for (const auto& c : store.clips)
        if (c.clip_id == p.clip_id)
          throw_data("patches of clip " + p.clip_id + " are not contiguous");
      PatchStore::ClipEntry entry;
      entry.clip_id = p.clip_id;
      entry.label_ids = p.labels;
      entry.first_patch = store.num_patches();
      store.clips.push_back(std::move(entry));
      clip_idx = store.num_clips() - 1;
    }
    store.clips[static_cast<size_t>(clip_idx)].num_patches++;
    store.meta.push_back({clip_idx, p.patch_index});
    store.features.insert(store.features.end(), p.values.begin(), p.values.end());
  }
  store.digest = store_digest(store);
  return store;
}

uint64_t store_digest(const PatchStore& store) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& c : store.clips) {
    mix(c.clip_id.data(), c.clip_id.size());
    for (int l : c.label_ids) mix(&l, sizeof(l));
    mix(&c.num_patches, sizeof(c.num_patches));
  }
  mix(store.features.data(), store.features.size() * sizeof(float));
  return h;
}

SplitIndices split_clips(const PatchStore& store, double val_fraction,
                         double eval_fraction, uint64_t seed) {
  if (val_fraction < 0 || eval_fraction < 0 ||
      val_fraction + eval_fraction >= 1.0)
    throw_config("split fractions must be non-negative and sum below 1");
  std::vector<int> order(static_cast<size_t>(store.num_clips()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(seed, "clip-split");
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  const int n = store.num_clips();
  const int n_val = static_cast<int>(n * val_fraction);
  const int n_eval = static_cast<int>(n * eval_fraction);
  SplitIndices split;
  split.val.assign(order.begin(), order.begin() + n_val);
  split.eval.assign(order.begin() + n_val, order.begin() + n_val + n_eval);
  split.train.assign(order.begin() + n_val + n_eval, order.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.eval.begin(), split.eval.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

DatasetView make_view(const PatchStore& store,
                      const std::vector<int>& clip_indices,
                      const std::vector<int>& label_ids) {
  DatasetView view;
  view.store = &store;
  view.label_ids = label_ids;
  view.clip_indices = clip_indices;
  view.positions.reserve(clip_indices.size());
  for (int ci : clip_indices) {
    const auto& clip = store.clips[static_cast<size_t>(ci)];
    std::set<int> pos;
    for (size_t c = 0; c < label_ids.size(); ++c)
      if (clip.label_ids.count(label_ids[c])) pos.insert(static_cast<int>(c));
    view.positions.push_back(std::move(pos));
  }
  return view;
}

TrainPool make_train_pool(const DatasetView& view) {
  TrainPool pool;
  pool.store = view.store;
  pool.label_ids = view.label_ids;
  const int c_count = static_cast<int>(view.label_ids.size());
  pool.clip_targets.assign(
      static_cast<size_t>(view.store->num_clips()) * c_count, 0.0f);

  std::vector<char> in_pool(static_cast<size_t>(view.store->num_clips()), 0);
  for (size_t i = 0; i < view.clip_indices.size(); ++i) {
    const int ci = view.clip_indices[i];
    // Clips that keep no labels under this vocabulary drop out of training.
    if (view.positions[i].empty()) continue;
    in_pool[static_cast<size_t>(ci)] = 1;
    float* row = pool.clip_targets.data() + static_cast<size_t>(ci) * c_count;
    for (int pos : view.positions[i]) row[pos] = 1.0f;
  }
  for (int p = 0; p < view.store->num_patches(); ++p)
    if (in_pool[static_cast<size_t>(view.store->meta[static_cast<size_t>(p)].clip)])
      pool.patches.push_back(p);
  if (pool.patches.empty()) throw_data("training pool is empty");
  return pool;
}

void sample_minibatch(const TrainPool& pool, int batch_size, Rng& rng,
                      Minibatch* out) {
  const int dim = pool.store->dim;
  const int c_count = static_cast<int>(pool.label_ids.size());
  out->size = batch_size;
  out->inputs.resize(static_cast<size_t>(batch_size) * dim);
  out->targets.resize(static_cast<size_t>(batch_size) * c_count);
  out->patch_ids.resize(static_cast<size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    const int pick = pool.patches[rng.below(pool.patches.size())];
    out->patch_ids[static_cast<size_t>(i)] = pick;
    std::memcpy(out->inputs.data() + static_cast<size_t>(i) * dim,
                pool.store->patch(pick), static_cast<size_t>(dim) * sizeof(float));
    const int clip = pool.store->meta[static_cast<size_t>(pick)].clip;
    std::memcpy(out->targets.data() + static_cast<size_t>(i) * c_count,
                pool.clip_targets.data() + static_cast<size_t>(clip) * c_count,
                static_cast<size_t>(c_count) * sizeof(float));
  }
}

std::vector<ClipScores> score_clips(Model& model, const DatasetView& view,
                                    int max_batch) {
  const PatchStore& store = *view.store;
  const int c_count = static_cast<int>(view.label_ids.size());
  std::vector<ClipScores> out;
  out.reserve(view.clip_indices.size());

  // Patches run through the net in chunks; inference-mode scores are
  // per-example so chunk boundaries cannot change results.
  std::vector<int> patch_ids;
  for (int ci : view.clip_indices) {
    const auto& clip = store.clips[static_cast<size_t>(ci)];
    for (int p = 0; p < clip.num_patches; ++p)
      patch_ids.push_back(clip.first_patch + p);
  }

  std::vector<float> scores(patch_ids.size() * static_cast<size_t>(c_count));
  std::vector<float> batch_buf;
  size_t done = 0;
  while (done < patch_ids.size()) {
    const int n = static_cast<int>(
        std::min<size_t>(static_cast<size_t>(max_batch), patch_ids.size() - done));
    batch_buf.resize(static_cast<size_t>(n) * store.dim);
    for (int i = 0; i < n; ++i)
      std::memcpy(batch_buf.data() + static_cast<size_t>(i) * store.dim,
                  store.patch(patch_ids[done + static_cast<size_t>(i)]),
                  static_cast<size_t>(store.dim) * sizeof(float));
    model.net.set_input(batch_buf.data(), n);
    model.net.forward(Phase::kInfer);
    const Tensor<float>& y = model.net.output()->out;
    if (y.dim(1) != c_count) throw_config("model output width does not match vocabulary");
    std::memcpy(scores.data() + done * c_count, y.data(),
                static_cast<size_t>(n) * c_count * sizeof(float));
    done += static_cast<size_t>(n);
  }

  size_t cursor = 0;
  for (int ci : view.clip_indices) {
    const auto& clip = store.clips[static_cast<size_t>(ci)];
    ClipScores cs;
    cs.clip_id = clip.clip_id;
    cs.mean_scores = aggregate_clip(
        std::vector<float>(scores.begin() + static_cast<long>(cursor * c_count),
                           scores.begin() + static_cast<long>(
                                                (cursor + clip.num_patches) * c_count)),
        clip.num_patches, c_count);
    cursor += static_cast<size_t>(clip.num_patches);
    out.push_back(std::move(cs));
  }
  return out;
}

std::vector<float> score_clip_patches(Model& model, const PatchStore& store,
                                      int clip_index, int max_batch) {
  const auto& clip = store.clips[static_cast<size_t>(clip_index)];
  if (clip.num_patches < 1) throw_data("no patches");
  const int c_count = model.net.output()->item_shape()[0];
  std::vector<float> scores(static_cast<size_t>(clip.num_patches) * c_count);
  std::vector<float> batch_buf;
  int done = 0;
  while (done < clip.num_patches) {
    const int n = std::min(max_batch, clip.num_patches - done);
    batch_buf.resize(static_cast<size_t>(n) * store.dim);
    for (int i = 0; i < n; ++i)
      std::memcpy(batch_buf.data() + static_cast<size_t>(i) * store.dim,
                  store.patch(clip.first_patch + done + i),
                  static_cast<size_t>(store.dim) * sizeof(float));
    model.net.set_input(batch_buf.data(), n);
    model.net.forward(Phase::kInfer);
    std::memcpy(scores.data() + static_cast<size_t>(done) * c_count,
                model.net.output()->out.data(),
                static_cast<size_t>(n) * c_count * sizeof(float));
    done += n;
  }
  return scores;
}

}  // namespace wvc
