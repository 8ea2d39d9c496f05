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

#ifndef WAVCLASS_TRAINER_HPP_
#define WAVCLASS_TRAINER_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wavclass/data.hpp"
#include "wavclass/model.hpp"

namespace wvc {

struct TrainConfig {
  int batch_size = 128;
  double learning_rate = 1e-3;
  double lr_decay_factor = 10.0;
  int64_t lr_decay_step = 0;  // 0 disables the schedule
  int64_t max_steps = 1000;
  uint64_t seed = 42;
  int vocabulary_size = 0;  // 0 = full vocabulary
  int64_t validation_interval = 500;
  int validation_clips = 512;
  int64_t checkpoint_interval = 0;  // 0 = final checkpoint only

  void validate() const;
};

// Base rate before lr_decay_step; divided by lr_decay_factor at and after it.
double lr_schedule(int64_t step, const TrainConfig& config);

struct StepLog {
  int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  bool has_validation = false;
  double val_accuracy = 0.0;
  double val_map = 0.0;
};

std::string step_series_csv(const std::vector<StepLog>& logs);

struct ValidationResult {
  double one_best_accuracy = 0.0;
  double mean_average_precision = 0.0;
};

// Owns the training loop: seeded sampling, forward/backward, Adam with the
// step schedule, periodic validation, checkpointing and resume.
class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& config);

  // One sampled minibatch through forward, loss, backward and Adam.
  double train_step(const TrainPool& pool);

  ValidationResult validate(const DatasetView& validation_view);

  // Runs until max_steps. If out_dir is non-empty, writes step-series CSV
  // and periodic checkpoints there. validation_view may be null.
  std::vector<StepLog> fit(const TrainPool& pool,
                           const DatasetView* validation_view,
                           const std::string& out_dir);

  void save(const std::string& path);
  void resume(const std::string& path);

  int64_t step() const { return step_; }
  Model& model() { return *model_; }
  AdamState<float>& optimizer() { return adam_; }

 private:
  Model* model_;
  TrainConfig config_;
  AdamState<float> adam_;
  Rng rng_;
  int64_t step_ = 0;
  Minibatch batch_;
};

}  // namespace wvc

#endif  // WAVCLASS_TRAINER_HPP_
