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

#include "wavclass/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wavclass/loss.hpp"

namespace wvc {

void TrainConfig::validate() const {
  if (batch_size < 1) throw_config("batch_size must be positive");
  if (learning_rate <= 0.0) throw_config("learning_rate must be positive");
  if (lr_decay_factor <= 0.0) throw_config("lr_decay_factor must be positive");
  if (max_steps < 1) throw_config("max_steps must be positive");
  if (lr_decay_step < 0 || lr_decay_step > max_steps)
    throw_config("lr_decay_step must lie within max_steps or be 0 (disabled)");
  if (validation_interval < 1) throw_config("validation_interval must be positive");
}

double lr_schedule(int64_t step, const TrainConfig& config) {
  if (config.lr_decay_step > 0 && step >= config.lr_decay_step)
    return config.learning_rate / config.lr_decay_factor;
  return config.learning_rate;
}

std::string step_series_csv(const std::vector<StepLog>& logs) {
  std::ostringstream out;
  out << "step,loss,lr,val_acc,val_map\n";
  for (const StepLog& l : logs) {
    out << l.step << "," << l.loss << "," << l.lr << ",";
    if (l.has_validation)
      out << l.val_accuracy << "," << l.val_map;
    else
      out << ",";
    out << "\n";
  }
  return out.str();
}

Trainer::Trainer(Model& model, const TrainConfig& config)
    : model_(&model), config_(config), rng_(config.seed, "train") {
  config_.validate();
  adam_.learning_rate = config_.learning_rate;
  adam_.init(model_->net.parameters());
}

double Trainer::train_step(const TrainPool& pool) {
  sample_minibatch(pool, config_.batch_size, rng_, &batch_);
  Network<float>& net = model_->net;
  net.set_input(batch_.inputs.data(), batch_.size);
  net.forward(Phase::kTrain);

  Tensor<float> targets({batch_.size, static_cast<int>(pool.label_ids.size())},
                        std::move(batch_.targets));
  Tensor<float> dscores;
  const double loss = multilabel_bce(net.output()->out, targets, &dscores);
  batch_.targets = std::move(targets.values);

  if (!std::isfinite(loss)) {
    std::ostringstream diag;
    diag << "non-finite loss at step " << step_ << "; batch clips:";
    for (int pid : batch_.patch_ids)
      diag << " " << pool.store->clips[static_cast<size_t>(
                         pool.store->meta[static_cast<size_t>(pid)].clip)].clip_id;
    throw_numeric(diag.str());
  }

  net.backward(dscores);
  adam_.learning_rate = lr_schedule(step_, config_);
  adam_step(net.parameters(), adam_);
  step_ += 1;
  return loss;
}

ValidationResult Trainer::validate(const DatasetView& validation_view) {
  if (validation_view.clip_indices.empty())
    throw_config("validation set is empty");
  const std::vector<ClipScores> scores = score_clips(*model_, validation_view);
  ValidationResult result;
  result.one_best_accuracy = one_best_accuracy(scores, validation_view.positions,
                                               validation_view.label_ids);
  const MetricsReport report = evaluate_scores(scores, validation_view.positions,
                                               validation_view.label_ids);
  result.mean_average_precision = report.balanced_map;
  return result;
}

std::vector<StepLog> Trainer::fit(const TrainPool& pool,
                                  const DatasetView* validation_view,
                                  const std::string& out_dir) {
  std::vector<StepLog> logs;
  double loss_accum = 0.0;
  int64_t loss_count = 0;
  while (step_ < config_.max_steps) {
    const double lr = lr_schedule(step_, config_);
    const double loss = train_step(pool);
    loss_accum += loss;
    ++loss_count;

    const bool at_interval = step_ % config_.validation_interval == 0;
    const bool at_end = step_ == config_.max_steps;
    if (at_interval || at_end) {
      StepLog log;
      log.step = step_;
      log.loss = loss_accum / static_cast<double>(loss_count);
      log.lr = lr;
      loss_accum = 0.0;
      loss_count = 0;
      if (validation_view && !validation_view->clip_indices.empty()) {
        const ValidationResult v = validate(*validation_view);
        log.has_validation = true;
        log.val_accuracy = v.one_best_accuracy;
        log.val_map = v.mean_average_precision;
      }
      logs.push_back(log);
    }
    if (!out_dir.empty() && config_.checkpoint_interval > 0 &&
        step_ % config_.checkpoint_interval == 0 && !at_end) {
      save(out_dir + "/model_step" + std::to_string(step_) + ".wck");
    }
  }
  if (!out_dir.empty()) {
    save(out_dir + "/model_final.wck");
    std::ofstream csv(out_dir + "/train_series.csv", std::ios::trunc);
    csv << step_series_csv(logs);
  }
  return logs;
}

void Trainer::save(const std::string& path) {
  TrainerSnapshot snap;
  snap.step = step_;
  snap.rng_state = rng_.state();
  save_checkpoint(path, *model_, &adam_, &snap);
}

void Trainer::resume(const std::string& path) {
  TrainerSnapshot snap;
  load_checkpoint(path, *model_, &adam_, &snap);
  step_ = snap.step;
  rng_.set_state(snap.rng_state);
}

}  // namespace wvc
