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

#ifndef WAVCLASS_DATA_HPP_
#define WAVCLASS_DATA_HPP_

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "wavclass/frontend.hpp"
#include "wavclass/model.hpp"
#include "wavclass/metrics.hpp"
#include "wavclass/rng.hpp"
#include "wavclass/vocab.hpp"

namespace wvc {

// One line of a manifest: {"clip_id": ..., "path": ..., "labels": [...]}.
struct ManifestRecord {
  std::string clip_id;
  std::string path;
  std::vector<std::string> labels;
};

std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path,
                    const std::vector<ManifestRecord>& records);

// Feature rows grouped by clip. dim is 96*64 for log-mel patches, but the
// same store carries embedding vectors and 64x20 baseline slices.
struct PatchStore {
  struct ClipEntry {
    std::string clip_id;
    std::set<int> label_ids;
    int first_patch = 0;
    int num_patches = 0;
  };
  struct PatchMeta {
    int clip = 0;         // index into clips
    int patch_index = 0;  // position within the clip
  };

  int dim = 0;
  std::vector<float> features;  // [num_patches x dim]
  std::vector<PatchMeta> meta;
  std::vector<ClipEntry> clips;
  uint64_t digest = 0;

  int num_patches() const { return static_cast<int>(meta.size()); }
  int num_clips() const { return static_cast<int>(clips.size()); }
  const float* patch(int i) const {
    return features.data() + static_cast<size_t>(i) * dim;
  }
};

// Reads each manifest wav, validates it, cuts patches, and resolves label
// names through the vocabulary. Unknown labels are a data error.
PatchStore featurize_manifest(const std::vector<ManifestRecord>& records,
                              const LabelVocabulary& vocab,
                              const FrontendConfig& cfg);

PatchStore store_from_patches(const std::vector<LogMelPatch>& patches, int dim);
uint64_t store_digest(const PatchStore& store);

// Deterministic split of clip indices by fractions (train, val, eval) using
// a seeded shuffle; fractions must sum to <= 1, remainder goes to train.
struct SplitIndices {
  std::vector<int> train, val, eval;
};
SplitIndices split_clips(const PatchStore& store, double val_fraction,
                         double eval_fraction, uint64_t seed);

// A clip subset projected onto an active vocabulary (ascending label ids).
// Targets are multi-hot rows over that vocabulary; clips whose labels all
// fall outside it are dropped from training pools but kept for evaluation.
struct DatasetView {
  const PatchStore* store = nullptr;
  std::vector<int> label_ids;             // ascending; class axis
  std::vector<int> clip_indices;          // clips in this view
  std::vector<std::set<int>> positions;   // per view clip: label positions
};

DatasetView make_view(const PatchStore& store,
                      const std::vector<int>& clip_indices,
                      const std::vector<int>& label_ids);

// Training pool: every patch of every view clip that kept at least one
// label. Patches inherit their clip's projected multi-hot target.
struct TrainPool {
  const PatchStore* store = nullptr;
  std::vector<int> label_ids;
  std::vector<int> patches;        // global patch indices
  std::vector<float> clip_targets; // [store->num_clips() x C]
};

TrainPool make_train_pool(const DatasetView& view);

struct Minibatch {
  int size = 0;
  std::vector<float> inputs;   // [size x dim]
  std::vector<float> targets;  // [size x C]
  std::vector<int> patch_ids;
};

// Uniform with replacement across the whole pool: a long clip is sampled in
// proportion to its patch count.
void sample_minibatch(const TrainPool& pool, int batch_size, Rng& rng,
                      Minibatch* out);

// Inference helpers (batched forward through the sigmoid head).
std::vector<ClipScores> score_clips(Model& model, const DatasetView& view,
                                    int max_batch = 256);
// Full [P x C] patch-score matrix for one clip.
std::vector<float> score_clip_patches(Model& model, const PatchStore& store,
                                      int clip_index, int max_batch = 256);

}  // namespace wvc

#endif  // WAVCLASS_DATA_HPP_
