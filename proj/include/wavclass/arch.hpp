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

#ifndef WAVCLASS_ARCH_HPP_
#define WAVCLASS_ARCH_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wavclass/layers.hpp"

namespace wvc {

enum class LayerKind {
  kConv,
  kMaxPool,
  kAvgPool,
  kDense,
  kRelu,
  kSigmoid,
  kBatchNorm,
  kFlatten,
  kResidual,   // sum of branch outputs; empty second branch = identity
  kInception,  // channel concat of branch outputs
};

// One declarative layer. Blocks nest through `branches`.
struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  std::string name;
  int kh = 0, kw = 0;
  int sh = 1, sw = 1;
  Padding padding = Padding::kSame;
  int units = 0;         // output channels (conv) or units (dense)
  bool use_bias = true;  // convs under batchnorm carry no bias
  std::vector<std::vector<LayerSpec>> branches;
};

struct ArchitectureSpec {
  std::string name;
  std::array<int, 3> input_shape = {96, 64, 1};  // H (frames), W (bands), C
  std::vector<LayerSpec> layers;
  int num_labels = 0;
  int bottleneck_units = 0;  // 0 = no bottleneck
};

// --- Shape inference -------------------------------------------------------

struct FeatureShape {
  int h = 0, w = 0, c = 0;
  int flat = 0;  // set once a flatten has run
  bool is_flat() const { return flat > 0; }
};

// Walks the layer graph; throws Error(kConfig, "invalid architecture") with
// the offending layer named if any shape rule fails.
FeatureShape infer_output_shape(const ArchitectureSpec& spec);

// Input width of the final dense layer (the penultimate representation).
int embedding_dim(const ArchitectureSpec& spec);

// --- Cost accounting -------------------------------------------------------

// Headline weights exclude biases and batchnorm scale/shift, which are
// reported in the biases_bn column; pooling and activations contribute
// nothing. Multiplies are per input example: output positions times
// multiply-accumulates per position for convs, D*U for dense layers.
struct CostRow {
  std::string name;
  std::string output_shape;
  int64_t weights = 0;
  int64_t biases_bn = 0;
  int64_t multiplies = 0;
};

struct CostReport {
  std::string architecture;
  std::vector<CostRow> rows;
  int64_t total_weights = 0;
  int64_t total_biases_bn = 0;
  int64_t total_multiplies = 0;
  std::vector<std::string> notes;

  std::string to_csv() const;
};

CostReport count_costs(const ArchitectureSpec& spec);

// --- Builders --------------------------------------------------------------

// Baseline: flatten, then num_layers x (dense units + relu), then the
// sigmoid output head.
ArchitectureSpec build_fully_connected(int num_layers, int units,
                                       int num_labels);

// First conv 11x11 at stride 2x1 to keep early activation counts close to
// the image original; batchnorm after every conv; no filter grouping.
ArchitectureSpec build_alexnet_audio(int num_labels);

// Configuration-E topology, batchnorm after every conv; five maxpools
// leave a 3x2x512 map ahead of the dense stack.
ArchitectureSpec build_vgg_audio(int num_labels);

// Stem truncated past the image version's first maxpool: the remaining stem
// is conv3x3 (80) then conv3x3 stride 2 (192), both valid; auxiliary head
// removed; final average pool 10x6.
ArchitectureSpec build_inception_v3_audio(int num_labels);

// First 7x7 conv at stride 1x1; standard 4-stage bottleneck body; final
// average pool 6x4.
ArchitectureSpec build_resnet50_audio(int num_labels);

// Inserts dense(units)+relu right before the output head. The layers ahead
// of the insertion point are untouched.
ArchitectureSpec with_bottleneck(const ArchitectureSpec& spec, int units = 128);

// Scales every channel/unit count except the output head by width_factor,
// rounding up. Topology is unchanged.
ArchitectureSpec shrink(const ArchitectureSpec& spec, double width_factor);

ArchitectureSpec build_architecture(const std::string& name, int num_labels,
                                    double width_factor = 1.0,
                                    bool bottleneck = false);

// --- Serialization ---------------------------------------------------------

std::string spec_to_json(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_json(const std::string& text);
uint64_t spec_digest(const ArchitectureSpec& spec);

}  // namespace wvc

#endif  // WAVCLASS_ARCH_HPP_
