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

#ifndef WAVCLASS_TRANSFER_HPP_
#define WAVCLASS_TRANSFER_HPP_

#include <string>

#include "wavclass/data.hpp"
#include "wavclass/trainer.hpp"

namespace wvc {

// Penultimate-layer activations for every patch in the store, as a new
// feature store with the same clips and labels. Inference-mode batchnorm,
// so extraction is a pure function of (checkpoint, patch).
PatchStore extract_embeddings(Model& model, const PatchStore& patches,
                              int max_batch = 256);

// Embedding file: magic "WEM1", version u32, dimension u32, then records
// {clip_id, patch_index u32, label ids, dimension f32 little-endian}.
void write_embeddings(const std::string& path, const PatchStore& embeddings);
PatchStore read_embeddings(const std::string& path);

// Non-overlapping 20-frame x 64-band slices of each 96x64 patch, flattened
// to 1280-wide rows: the raw-feature baseline representation.
PatchStore logmel_baseline_store(const PatchStore& patches,
                                 const FrontendConfig& cfg,
                                 int sub_frames = 20);

// Both sides of the comparison share one hidden-layer width, train config,
// split and evaluation subset; only the input representation differs.
struct TransferConfig {
  int hidden_units = 512;
  TrainConfig train;
  int eval_per_class = 33;
};

struct TransferSide {
  std::string representation;
  int input_dim = 0;
  MetricsReport report;
};

struct TransferComparison {
  TransferSide embedding;
  TransferSide baseline;
};

// Trains the fixed small classifier on one feature store and evaluates it
// on a balanced subset of the test clips.
TransferSide train_feature_classifier(const PatchStore& features,
                                      const std::vector<int>& train_clips,
                                      const std::vector<int>& test_clips,
                                      const TransferConfig& config,
                                      const std::string& representation);

// The full experiment: embeddings from the source model vs the log-mel
// baseline on identical splits and seeds. Throws if any transfer test clip
// id also appears in source_train_clip_ids.
TransferComparison run_transfer_comparison(
    Model& source_model, const PatchStore& transfer_patches,
    const std::vector<std::string>& source_train_clip_ids,
    const FrontendConfig& frontend, const TransferConfig& config,
    double test_fraction, uint64_t split_seed);

}  // namespace wvc

#endif  // WAVCLASS_TRANSFER_HPP_
