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

#include "wavclass/transfer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

namespace wvc {

PatchStore extract_embeddings(Model& model, const PatchStore& patches,
                              int max_batch) {
  if (model.net.embedding_node < 0) throw_config("no embedding layer");
  const int dim = model.net.node_at(model.net.embedding_node)->item_shape()[0];

  PatchStore out;
  out.dim = dim;
  out.clips = patches.clips;
  out.meta = patches.meta;
  out.features.resize(static_cast<size_t>(patches.num_patches()) * dim);

  std::vector<float> batch_buf;
  int done = 0;
  while (done < patches.num_patches()) {
    const int n = std::min(max_batch, patches.num_patches() - done);
    batch_buf.resize(static_cast<size_t>(n) * patches.dim);
    for (int i = 0; i < n; ++i)
      std::memcpy(batch_buf.data() + static_cast<size_t>(i) * patches.dim,
                  patches.patch(done + i),
                  static_cast<size_t>(patches.dim) * sizeof(float));
    const Tensor<float>& emb = forward_to_embedding(model, batch_buf.data(), n);
    std::memcpy(out.features.data() + static_cast<size_t>(done) * dim,
                emb.data(), static_cast<size_t>(n) * dim * sizeof(float));
    done += n;
  }
  out.digest = store_digest(out);
  return out;
}

namespace {
void put_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
uint32_t get_u32(std::ifstream& in, const std::string& path) {
  uint32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw_data("truncated embedding file: " + path);
  return v;
}
}  // namespace

void write_embeddings(const std::string& path, const PatchStore& embeddings) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("cannot open embedding file for writing: " + path);
  out.write("WEM1", 4);
  put_u32(out, 1);  // version
  put_u32(out, static_cast<uint32_t>(embeddings.dim));
  put_u32(out, static_cast<uint32_t>(embeddings.num_patches()));
  for (int p = 0; p < embeddings.num_patches(); ++p) {
    const auto& meta = embeddings.meta[static_cast<size_t>(p)];
    const auto& clip = embeddings.clips[static_cast<size_t>(meta.clip)];
    put_u32(out, static_cast<uint32_t>(clip.clip_id.size()));
    out.write(clip.clip_id.data(),
              static_cast<std::streamsize>(clip.clip_id.size()));
    put_u32(out, static_cast<uint32_t>(meta.patch_index));
    put_u32(out, static_cast<uint32_t>(clip.label_ids.size()));
    for (int l : clip.label_ids) put_u32(out, static_cast<uint32_t>(l));
    out.write(reinterpret_cast<const char*>(embeddings.patch(p)),
              static_cast<std::streamsize>(embeddings.dim * sizeof(float)));
  }
  if (!out) throw_data("failed writing embedding file: " + path);
}

PatchStore read_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open embedding file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "WEM1", 4) != 0)
    throw_data("bad embedding file magic: " + path);
  if (get_u32(in, path) != 1)
    throw_data("unsupported embedding file version: " + path);
  const uint32_t dim = get_u32(in, path);
  const uint32_t count = get_u32(in, path);

  PatchStore out;
  out.dim = static_cast<int>(dim);
  out.features.resize(static_cast<size_t>(count) * dim);
  for (uint32_t p = 0; p < count; ++p) {
    const uint32_t id_len = get_u32(in, path);
    std::string clip_id(id_len, '\0');
    in.read(clip_id.data(), id_len);
    const uint32_t patch_index = get_u32(in, path);
    const uint32_t n_labels = get_u32(in, path);
    std::set<int> labels;
    for (uint32_t l = 0; l < n_labels; ++l)
      labels.insert(static_cast<int>(get_u32(in, path)));
    in.read(reinterpret_cast<char*>(out.features.data() + static_cast<size_t>(p) * dim),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw_data("truncated embedding file: " + path);

    if (out.clips.empty() || out.clips.back().clip_id != clip_id) {
      PatchStore::ClipEntry entry;
      entry.clip_id = clip_id;
      entry.label_ids = labels;
      entry.first_patch = static_cast<int>(p);
      out.clips.push_back(std::move(entry));
    }
    out.clips.back().num_patches++;
    out.meta.push_back({static_cast<int>(out.clips.size()) - 1,
                        static_cast<int>(patch_index)});
  }
  out.digest = store_digest(out);
  return out;
}

PatchStore logmel_baseline_store(const PatchStore& patches,
                                 const FrontendConfig& cfg, int sub_frames) {
  const int frames = cfg.patch_frames;
  const int bands = cfg.mel_bands;
  if (patches.dim != frames * bands)
    throw_config("baseline slicing expects log-mel patches");
  const int per_patch = frames / sub_frames;  // complete slices only
  if (per_patch < 1) throw_config("sub-patch longer than patch");
  const int dim = sub_frames * bands;

  PatchStore out;
  out.dim = dim;
  out.clips = patches.clips;
  for (auto& clip : out.clips) {
    clip.first_patch *= per_patch;
    clip.num_patches *= per_patch;
  }
  out.features.reserve(static_cast<size_t>(patches.num_patches()) * per_patch * dim);
  out.meta.reserve(static_cast<size_t>(patches.num_patches()) * per_patch);
  for (int p = 0; p < patches.num_patches(); ++p) {
    const float* src = patches.patch(p);
    const auto& meta = patches.meta[static_cast<size_t>(p)];
    for (int s = 0; s < per_patch; ++s) {
      out.features.insert(out.features.end(),
                          src + static_cast<size_t>(s) * sub_frames * bands,
                          src + static_cast<size_t>(s + 1) * sub_frames * bands);
      out.meta.push_back({meta.clip, meta.patch_index * per_patch + s});
    }
  }
  out.digest = store_digest(out);
  return out;
}

TransferSide train_feature_classifier(const PatchStore& features,
                                      const std::vector<int>& train_clips,
                                      const std::vector<int>& test_clips,
                                      const TransferConfig& config,
                                      const std::string& representation) {
  // Active vocabulary: every label present in the store, ascending.
  std::set<int> ids;
  for (const auto& clip : features.clips)
    ids.insert(clip.label_ids.begin(), clip.label_ids.end());
  const std::vector<int> label_ids(ids.begin(), ids.end());

  ArchitectureSpec spec;
  spec.name = "transfer-mlp-" + representation;
  spec.input_shape = {1, features.dim, 1};
  spec.num_labels = static_cast<int>(label_ids.size());
  spec.layers.push_back([&] {
    LayerSpec l;
    l.kind = LayerKind::kFlatten;
    l.name = "flatten";
    return l;
  }());
  LayerSpec hidden;
  hidden.kind = LayerKind::kDense;
  hidden.name = "hidden";
  hidden.units = config.hidden_units;
  spec.layers.push_back(hidden);
  LayerSpec relu;
  relu.kind = LayerKind::kRelu;
  relu.name = "hidden.relu";
  spec.layers.push_back(relu);
  LayerSpec head;
  head.kind = LayerKind::kDense;
  head.name = "logits";
  head.units = spec.num_labels;
  spec.layers.push_back(head);
  LayerSpec sig;
  sig.kind = LayerKind::kSigmoid;
  sig.name = "output";
  spec.layers.push_back(sig);

  Model model = build_model(spec, config.train.seed);
  Trainer trainer(model, config.train);
  const DatasetView train_view = make_view(features, train_clips, label_ids);
  const TrainPool pool = make_train_pool(train_view);
  trainer.fit(pool, nullptr, "");

  const DatasetView test_view = make_view(features, test_clips, label_ids);
  const BalancedEvalSet balanced = build_balanced_eval(
      test_view.positions, label_ids, config.eval_per_class, config.train.seed);
  std::vector<int> eval_clips;
  std::vector<std::set<int>> eval_positions;
  for (int idx : balanced.clip_indices) {
    eval_clips.push_back(test_view.clip_indices[static_cast<size_t>(idx)]);
    eval_positions.push_back(test_view.positions[static_cast<size_t>(idx)]);
  }
  const DatasetView eval_view = make_view(features, eval_clips, label_ids);
  const std::vector<ClipScores> scores = score_clips(model, eval_view);

  TransferSide side;
  side.representation = representation;
  side.input_dim = features.dim;
  side.report = evaluate_scores(scores, eval_view.positions, label_ids);
  side.report.eval_descriptor = representation + " balanced eval, " +
                                std::to_string(eval_clips.size()) + " clips";
  return side;
}

TransferComparison run_transfer_comparison(
    Model& source_model, const PatchStore& transfer_patches,
    const std::vector<std::string>& source_train_clip_ids,
    const FrontendConfig& frontend, const TransferConfig& config,
    double test_fraction, uint64_t split_seed) {
  const std::set<std::string> source_ids(source_train_clip_ids.begin(),
                                         source_train_clip_ids.end());
  const SplitIndices split =
      split_clips(transfer_patches, 0.0, test_fraction, split_seed);
  for (int ci : split.eval) {
    const std::string& id = transfer_patches.clips[static_cast<size_t>(ci)].clip_id;
    if (source_ids.count(id))
      throw_data("transfer test clip also in source training set: " + id);
  }

  const PatchStore embeddings = extract_embeddings(source_model, transfer_patches);
  const PatchStore baseline = logmel_baseline_store(transfer_patches, frontend);

  TransferComparison cmp;
  cmp.embedding = train_feature_classifier(embeddings, split.train, split.eval,
                                           config, "embedding");
  cmp.baseline = train_feature_classifier(baseline, split.train, split.eval,
                                          config, "logmel-64x20");
  return cmp;
}

}  // namespace wvc
