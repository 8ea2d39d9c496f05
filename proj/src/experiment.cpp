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

#include "wavclass/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace wvc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_data("cannot write " + path);
  out << text;
}

std::string read_text_or_empty(const std::string& path) {
  std::ifstream in(path);
  if (!in) return "";
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_config(std::string("bad experiment config: ") + e.what());
  }
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  c.architecture = j.value("architecture", c.architecture);
  c.width_factor = j.value("width_factor", c.width_factor);
  c.bottleneck = j.value("bottleneck", c.bottleneck);
  if (j.contains("train")) {
    const json& t = j["train"];
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.lr_decay_factor = t.value("lr_decay_factor", c.train.lr_decay_factor);
    c.train.lr_decay_step = t.value("lr_decay_step", c.train.lr_decay_step);
    c.train.max_steps = t.value("max_steps", c.train.max_steps);
    c.train.seed = t.value("seed", c.train.seed);
    c.train.vocabulary_size = t.value("vocabulary_size", c.train.vocabulary_size);
    c.train.validation_interval =
        t.value("validation_interval", c.train.validation_interval);
    c.train.validation_clips = t.value("validation_clips", c.train.validation_clips);
    c.train.checkpoint_interval =
        t.value("checkpoint_interval", c.train.checkpoint_interval);
  }
  if (j.contains("frontend")) {
    const json& f = j["frontend"];
    c.frontend.mel_low_hz = f.value("mel_low_hz", c.frontend.mel_low_hz);
    c.frontend.mel_high_hz = f.value("mel_high_hz", c.frontend.mel_high_hz);
    c.frontend.log_offset = f.value("log_offset", c.frontend.log_offset);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    c.manifest_path = d.value("manifest", c.manifest_path);
    c.vocabulary_path = d.value("vocabulary", c.vocabulary_path);
    c.feature_cache = d.value("features", c.feature_cache);
    c.val_fraction = d.value("val_fraction", c.val_fraction);
    c.eval_fraction = d.value("eval_fraction", c.eval_fraction);
    c.eval_per_class = d.value("eval_per_class", c.eval_per_class);
  }
  if (j.contains("sweeps")) {
    const json& s = j["sweeps"];
    if (s.contains("training_sizes"))
      for (const auto& v : s["training_sizes"]) c.training_sizes.push_back(v.get<int64_t>());
    if (s.contains("vocabulary_sizes"))
      for (const auto& v : s["vocabulary_sizes"]) c.vocabulary_sizes.push_back(v.get<int>());
    c.sweep_bottleneck = s.value("bottleneck", c.sweep_bottleneck);
  }
  c.out_dir = j.value("out_dir", c.out_dir);
  return c;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["architecture"] = c.architecture;
  j["width_factor"] = c.width_factor;
  j["bottleneck"] = c.bottleneck;
  j["train"] = {{"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"lr_decay_factor", c.train.lr_decay_factor},
                {"lr_decay_step", c.train.lr_decay_step},
                {"max_steps", c.train.max_steps},
                {"seed", c.train.seed},
                {"vocabulary_size", c.train.vocabulary_size},
                {"validation_interval", c.train.validation_interval},
                {"validation_clips", c.train.validation_clips},
                {"checkpoint_interval", c.train.checkpoint_interval}};
  j["frontend"] = {{"mel_low_hz", c.frontend.mel_low_hz},
                   {"mel_high_hz", c.frontend.mel_high_hz},
                   {"log_offset", c.frontend.log_offset}};
  j["data"] = {{"manifest", c.manifest_path},
               {"vocabulary", c.vocabulary_path},
               {"features", c.feature_cache},
               {"val_fraction", c.val_fraction},
               {"eval_fraction", c.eval_fraction},
               {"eval_per_class", c.eval_per_class}};
  j["sweeps"] = {{"training_sizes", c.training_sizes},
                 {"vocabulary_sizes", c.vocabulary_sizes},
                 {"bottleneck", c.sweep_bottleneck}};
  j["out_dir"] = c.out_dir;
  return j.dump(2);
}

uint64_t experiment_config_digest(const ExperimentConfig& config) {
  // The digest identifies the experiment; where its artifacts land does not
  // change what it computes, so reruns into fresh directories stay
  // byte-comparable.
  ExperimentConfig canonical = config;
  canonical.out_dir.clear();
  return fnv1a64(experiment_config_to_json(canonical));
}

namespace {

struct LoadedData {
  LabelVocabulary vocab;
  PatchStore store;
};

LoadedData load_data(const ExperimentConfig& config) {
  LoadedData data;
  const std::vector<ManifestRecord> records = read_manifest(config.manifest_path);
  if (!config.vocabulary_path.empty()) {
    data.vocab = read_vocabulary(config.vocabulary_path);
  } else {
    std::map<std::string, int64_t> counts;
    for (const auto& rec : records)
      for (const auto& name : rec.labels) counts[name] += 1;
    data.vocab = make_vocabulary(counts);
  }
  if (!config.feature_cache.empty() && fs::exists(config.feature_cache)) {
    const std::vector<LogMelPatch> patches =
        read_patch_cache(config.feature_cache, config.frontend);
    data.store = store_from_patches(
        patches, config.frontend.patch_frames * config.frontend.mel_bands);
  } else {
    data.store = featurize_manifest(records, data.vocab, config.frontend);
    if (!config.feature_cache.empty()) {
      std::vector<LogMelPatch> patches;
      patches.reserve(static_cast<size_t>(data.store.num_patches()));
      for (int p = 0; p < data.store.num_patches(); ++p) {
        const auto& meta = data.store.meta[static_cast<size_t>(p)];
        const auto& clip = data.store.clips[static_cast<size_t>(meta.clip)];
        LogMelPatch lp;
        lp.clip_id = clip.clip_id;
        lp.patch_index = meta.patch_index;
        lp.labels = clip.label_ids;
        lp.values.assign(data.store.patch(p), data.store.patch(p) + data.store.dim);
        patches.push_back(std::move(lp));
      }
      write_patch_cache(config.feature_cache, patches, config.frontend);
    }
  }
  return data;
}

std::vector<int> active_label_ids(const LabelVocabulary& vocab, int top_k) {
  const LabelVocabulary active =
      top_k > 0 && top_k < vocab.size() ? restrict_vocabulary(vocab, top_k) : vocab;
  return active.label_ids_ascending();
}

// Balanced eval subset of the eval split, as a scoreable view.
DatasetView balanced_eval_view(const PatchStore& store,
                               const std::vector<int>& eval_clips,
                               const std::vector<int>& label_ids,
                               int per_class, uint64_t seed) {
  const DatasetView eval_view = make_view(store, eval_clips, label_ids);
  const BalancedEvalSet balanced =
      build_balanced_eval(eval_view.positions, label_ids, per_class, seed);
  std::vector<int> clips;
  clips.reserve(balanced.clip_indices.size());
  for (int idx : balanced.clip_indices)
    clips.push_back(eval_view.clip_indices[static_cast<size_t>(idx)]);
  return make_view(store, clips, label_ids);
}

MetricsReport evaluate_view(Model& model, const DatasetView& view) {
  const std::vector<ClipScores> scores = score_clips(model, view);
  return evaluate_scores(scores, view.positions, view.label_ids);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto wall_start = std::chrono::steady_clock::now();
  fs::create_directories(config.out_dir);

  const LoadedData data = load_data(config);
  const std::vector<int> label_ids =
      active_label_ids(data.vocab, config.train.vocabulary_size);
  const SplitIndices split = split_clips(data.store, config.val_fraction,
                                         config.eval_fraction, config.train.seed);

  ArchitectureSpec spec =
      build_architecture(config.architecture, static_cast<int>(label_ids.size()),
                         config.width_factor, config.bottleneck);
  Model model = build_model(spec, config.train.seed);
  const CostReport costs = count_costs(spec);

  const DatasetView train_view = make_view(data.store, split.train, label_ids);
  const TrainPool pool = make_train_pool(train_view);

  std::vector<int> val_clips = split.val;
  if (static_cast<int>(val_clips.size()) > config.train.validation_clips)
    val_clips.resize(static_cast<size_t>(config.train.validation_clips));
  const DatasetView val_view = make_view(data.store, val_clips, label_ids);

  Trainer trainer(model, config.train);
  trainer.fit(pool, val_view.clip_indices.empty() ? nullptr : &val_view,
              config.out_dir);

  const DatasetView eval_view =
      balanced_eval_view(data.store, split.eval, label_ids,
                         config.eval_per_class, config.train.seed);
  MetricsReport report = evaluate_view(model, eval_view);
  report.eval_descriptor = "balanced eval, " +
                           std::to_string(eval_view.clip_indices.size()) +
                           " clips, per_class " +
                           std::to_string(config.eval_per_class);

  // Timeline for the longest eval clip (ties to the lexically first id).
  int timeline_clip = -1;
  for (int ci : eval_view.clip_indices) {
    if (timeline_clip < 0 ||
        data.store.clips[static_cast<size_t>(ci)].num_patches >
            data.store.clips[static_cast<size_t>(timeline_clip)].num_patches)
      timeline_clip = ci;
  }

  ExperimentResult result;
  result.report = report;
  result.config_digest = experiment_config_digest(config);
  result.corpus_digest = data.store.digest;
  result.run_dir = config.out_dir;

  json summary;
  summary["name"] = config.name;
  summary["architecture"] = spec.name;
  summary["config_digest"] = result.config_digest;
  summary["corpus_digest"] = result.corpus_digest;
  summary["steps"] = config.train.max_steps;
  summary["balanced_auc"] = report.balanced_auc;
  summary["balanced_dprime"] = report.balanced_dprime;
  summary["balanced_map"] = report.balanced_map;
  summary["evaluated_classes"] = report.evaluated_classes;
  summary["vocab_size"] = static_cast<int>(label_ids.size());
  summary["eval_clips"] = static_cast<int>(eval_view.clip_indices.size());
  summary["weights"] = costs.total_weights;
  summary["multiplies"] = costs.total_multiplies;
  result.summary_json = summary.dump(2);

  write_text(config.out_dir + "/summary.json", result.summary_json);
  write_text(config.out_dir + "/per_class.csv", report.per_class_csv());
  write_text(config.out_dir + "/scatter.csv", report.scatter_csv());
  write_text(config.out_dir + "/cost_report.csv", costs.to_csv());
  write_text(config.out_dir + "/arch.json", spec_to_json(spec));
  if (timeline_clip >= 0) {
    const std::vector<float> pscores =
        score_clip_patches(model, data.store, timeline_clip);
    const Timeline tl = top_peak_timeline(
        pscores, data.store.clips[static_cast<size_t>(timeline_clip)].num_patches,
        static_cast<int>(label_ids.size()), 16, config.frontend.patch_seconds());
    std::vector<std::string> names;
    for (int id : label_ids) {
      const VocabEntry* e = data.vocab.find_by_id(id);
      names.push_back(e ? e->name : std::to_string(id));
    }
    write_text(config.out_dir + "/timeline.csv", tl.to_csv(names));
  }

  // Wall-clock lives outside summary.json so reruns stay byte-identical.
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
          .count();
  json info;
  info["wall_seconds"] = wall_s;
  write_text(config.out_dir + "/run_info.json", info.dump(2));
  return result;
}

std::vector<SweepRow> run_sweeps(const ExperimentConfig& config) {
  fs::create_directories(config.out_dir);
  const LoadedData data = load_data(config);
  const SplitIndices split = split_clips(data.store, config.val_fraction,
                                         config.eval_fraction, config.train.seed);
  std::vector<SweepRow> rows;

  if (!config.vocabulary_sizes.empty()) {
    // Every row is scored on the smallest vocabulary of the axis.
    const int smallest =
        *std::min_element(config.vocabulary_sizes.begin(), config.vocabulary_sizes.end());
    const std::vector<int> eval_ids = active_label_ids(data.vocab, smallest);
    const DatasetView eval_view =
        balanced_eval_view(data.store, split.eval, eval_ids,
                           config.eval_per_class, config.train.seed);
    std::vector<bool> bneck_axis = {false};
    if (config.sweep_bottleneck) bneck_axis = {false, true};
    for (int vs : config.vocabulary_sizes) {
      for (bool bneck : bneck_axis) {
        const std::vector<int> train_ids = active_label_ids(data.vocab, vs);
        ArchitectureSpec spec = build_architecture(
            config.architecture, static_cast<int>(train_ids.size()),
            config.width_factor, bneck);
        Model model = build_model(spec, config.train.seed);
        Trainer trainer(model, config.train);
        const DatasetView train_view = make_view(data.store, split.train, train_ids);
        trainer.fit(make_train_pool(train_view), nullptr, "");

        // Project the model's scores onto the shared evaluation vocabulary.
        std::vector<int> keep;
        for (int id : eval_ids) {
          const auto it = std::find(train_ids.begin(), train_ids.end(), id);
          if (it == train_ids.end())
            throw_config("evaluation vocabulary not nested in training vocabulary");
          keep.push_back(static_cast<int>(it - train_ids.begin()));
        }
        std::vector<ClipScores> scores = score_clips(model,
            make_view(data.store, eval_view.clip_indices, train_ids));
        for (ClipScores& cs : scores) {
          std::vector<double> projected;
          projected.reserve(keep.size());
          for (int k : keep) projected.push_back(cs.mean_scores[static_cast<size_t>(k)]);
          cs.mean_scores = std::move(projected);
        }
        const MetricsReport report =
            evaluate_scores(scores, eval_view.positions, eval_ids);
        rows.push_back({"labels", vs, bneck, report.balanced_auc,
                        report.balanced_dprime, report.balanced_map});
      }
    }
  }

  if (!config.training_sizes.empty()) {
    const std::vector<int> label_ids =
        active_label_ids(data.vocab, config.train.vocabulary_size);
    const DatasetView eval_view =
        balanced_eval_view(data.store, split.eval, label_ids,
                           config.eval_per_class, config.train.seed);
    // One seeded order; each size takes a prefix, so subsets nest.
    std::vector<int> order = split.train;
    Rng rng(config.train.seed, "size-sweep");
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);
    for (int64_t size : config.training_sizes) {
      if (size > static_cast<int64_t>(order.size()))
        throw_config("sweep size exceeds training corpus");
      std::vector<int> subset(order.begin(), order.begin() + size);
      std::sort(subset.begin(), subset.end());
      ArchitectureSpec spec = build_architecture(
          config.architecture, static_cast<int>(label_ids.size()),
          config.width_factor, config.bottleneck);
      Model model = build_model(spec, config.train.seed);
      Trainer trainer(model, config.train);
      const DatasetView train_view = make_view(data.store, subset, label_ids);
      trainer.fit(make_train_pool(train_view), nullptr, "");
      const MetricsReport report = evaluate_view(model, eval_view);
      rows.push_back({"clips", size, config.bottleneck, report.balanced_auc,
                      report.balanced_dprime, report.balanced_map});
    }
  }

  write_text(config.out_dir + "/sweeps.csv", sweep_csv(rows));
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "axis,value,bottleneck,auc,dprime,map\n";
  out.precision(9);
  for (const SweepRow& r : rows)
    out << r.axis << "," << r.value << "," << (r.bottleneck ? "yes" : "no")
        << "," << r.auc << "," << r.dprime << "," << r.map << "\n";
  return out.str();
}

std::string report_runs(const std::vector<std::string>& run_dirs) {
  std::ostringstream out;
  out << "run | architecture | weights | multiplies | steps | wall_s | "
         "balanced AUC | d-prime | mAP\n";
  for (const std::string& dir : run_dirs) {
    const std::string summary_text = read_text_or_empty(dir + "/summary.json");
    if (summary_text.empty()) {
      out << dir << " | absent\n";
      continue;
    }
    json j = json::parse(summary_text, nullptr, false);
    if (j.is_discarded()) {
      out << dir << " | unreadable summary\n";
      continue;
    }
    std::string wall = "-";
    const std::string info_text = read_text_or_empty(dir + "/run_info.json");
    if (!info_text.empty()) {
      json info = json::parse(info_text, nullptr, false);
      if (!info.is_discarded() && info.contains("wall_seconds")) {
        std::ostringstream w;
        w.precision(1);
        w << std::fixed << info["wall_seconds"].get<double>();
        wall = w.str();
      }
    }
    out << dir << " | " << j.value("architecture", std::string("?")) << " | "
        << j.value("weights", int64_t{0}) << " | "
        << j.value("multiplies", int64_t{0}) << " | "
        << j.value("steps", int64_t{0}) << " | " << wall << " | "
        << j.value("balanced_auc", 0.0) << " | "
        << j.value("balanced_dprime", 0.0) << " | "
        << j.value("balanced_map", 0.0) << "\n";
  }
  return out.str();
}

}  // namespace wvc
