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

#ifndef WAVCLASS_MODEL_HPP_
#define WAVCLASS_MODEL_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "wavclass/adam.hpp"
#include "wavclass/arch.hpp"
#include "wavclass/layers.hpp"
#include "wavclass/rng.hpp"

namespace wvc {

// Instantiates a declarative spec as a runnable DAG. Weights draw from
// He-normal (stddev sqrt(2/fan_in)) in construction order, so a (spec, seed)
// pair fully determines the initial parameters.
template <typename T>
Network<T> compile_network(const ArchitectureSpec& spec, Rng& init_rng);

struct Model {
  ArchitectureSpec spec;
  Network<float> net;
  uint64_t digest = 0;
};

Model build_model(const ArchitectureSpec& spec, uint64_t init_seed);

// Runs the graph only up to the penultimate representation and returns a
// pointer to its [n x embedding_dim] activations. Throws "no embedding
// layer" when the head is not dense+sigmoid.
const Tensor<float>& forward_to_embedding(Model& model, const float* input,
                                          int n);

// Optional trailing sections of a checkpoint.
struct TrainerSnapshot {
  int64_t step = 0;
  std::array<uint64_t, 4> rng_state = {0, 0, 0, 0};
};

// Checkpoint layout: magic "WCK1", version u32, architecture digest u64,
// flags u8 (bit0 = optimizer state, bit1 = trainer state), then
// per-parameter records {name, shape, row-major f32 little-endian}.
void save_checkpoint(const std::string& path, Model& model,
                     const AdamState<float>* adam = nullptr,
                     const TrainerSnapshot* snapshot = nullptr);

// Loads parameters (and optional sections) into an existing model whose
// architecture digest must match the file.
void load_checkpoint(const std::string& path, Model& model,
                     AdamState<float>* adam = nullptr,
                     TrainerSnapshot* snapshot = nullptr);

// Digest stored in a checkpoint header without loading the tensors.
uint64_t checkpoint_digest(const std::string& path);

}  // namespace wvc

#endif  // WAVCLASS_MODEL_HPP_
