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

#ifndef WAVCLASS_EXPERIMENT_HPP_
#define WAVCLASS_EXPERIMENT_HPP_

#include <string>
#include <vector>

#include "wavclass/arch.hpp"
#include "wavclass/trainer.hpp"
#include "wavclass/transfer.hpp"

namespace wvc {

// One training-and-evaluation run plus the sweep axes. The digest of the
// whole config is stamped into every artifact it produces.
struct ExperimentConfig {
  std::string name = "experiment";
  std::string architecture = "resnet";  // fc|alexnet|vgg|inception|resnet
  double width_factor = 1.0;
  bool bottleneck = false;
  TrainConfig train;
  FrontendConfig frontend;

  std::string manifest_path;
  std::string vocabulary_path;  // empty = derive counts from the manifest
  std::string feature_cache;    // optional patch cache ("WVC1") location

  double val_fraction = 0.1;
  double eval_fraction = 0.1;
  int eval_per_class = 33;

  std::vector<int64_t> training_sizes;  // size-sweep axis (clip counts)
  std::vector<int> vocabulary_sizes;    // label-sweep axis
  bool sweep_bottleneck = false;        // pair each label-sweep row

  std::string out_dir = "out";
};

ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& config);
uint64_t experiment_config_digest(const ExperimentConfig& config);

struct ExperimentResult {
  MetricsReport report;
  uint64_t config_digest = 0;
  uint64_t corpus_digest = 0;
  std::string summary_json;
  std::string run_dir;
};

// Featurize (or load the cache), split, train, evaluate on the balanced
// eval subset, and emit per-class CSV, summary JSON, scatter and timeline
// CSVs, cost accounting, checkpoints and the step series.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SweepRow {
  std::string axis;  // "labels" or "clips"
  int64_t value = 0;
  bool bottleneck = false;
  double auc = 0.0, dprime = 0.0, map = 0.0;
};

// Label-set-size sweep rows all evaluate on the smallest vocabulary in the
// axis; training-size sweep rows share the eval clips exactly.
std::vector<SweepRow> run_sweeps(const ExperimentConfig& config);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Consolidated human-readable summary across run directories; missing
// artifacts are listed as absent rather than failing.
std::string report_runs(const std::vector<std::string>& run_dirs);

}  // namespace wvc

#endif  // WAVCLASS_EXPERIMENT_HPP_
