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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wavclass/experiment.hpp"
#include "wavclass/parallel.hpp"
#include "wavclass/synth.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) wvc::throw_config("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

wvc::SynthConfig synth_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    wvc::throw_config(std::string("bad synth config: ") + e.what());
  }
  wvc::SynthConfig c;
  c.seed = j.value("seed", c.seed);
  c.num_clips = j.value("num_clips", c.num_clips);
  if (j.contains("duration_s")) {
    c.min_duration_s = j["duration_s"][0].get<double>();
    c.max_duration_s = j["duration_s"][1].get<double>();
  }
  if (j.contains("classes")) {
    c.event_classes.clear();
    for (const auto& v : j["classes"]) c.event_classes.push_back(v.get<std::string>());
  }
  if (j.contains("events_per_clip")) {
    c.min_events = j["events_per_clip"][0].get<int>();
    c.max_events = j["events_per_clip"][1].get<int>();
  }
  if (j.contains("event_duration_s")) {
    c.min_event_s = j["event_duration_s"][0].get<double>();
    c.max_event_s = j["event_duration_s"][1].get<double>();
  }
  c.snr_db = j.value("snr_db", c.snr_db);
  c.uninformative_fraction = j.value("uninformative_fraction", c.uninformative_fraction);
  c.id_prefix = j.value("id_prefix", c.id_prefix);
  return c;
}

struct GlobalFlags {
  int64_t seed = -1;  // -1 = keep config value
  int threads = 1;
};

void require_single_thread(const GlobalFlags& flags) {
  if (flags.threads > 1)
    wvc::throw_config("training is single-threaded; --threads must be 1");
}

// Non-training subcommands may use the deterministic intra-op pool.
void apply_threads(const GlobalFlags& flags) {
  wvc::set_num_threads(flags.threads);
}

wvc::ExperimentConfig load_experiment(const std::string& config_path,
                                      const GlobalFlags& flags,
                                      const std::string& manifest,
                                      const std::string& out_dir) {
  wvc::ExperimentConfig cfg = wvc::experiment_config_from_json(slurp(config_path));
  if (flags.seed >= 0) cfg.train.seed = static_cast<uint64_t>(flags.seed);
  if (!manifest.empty()) cfg.manifest_path = manifest;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (cfg.manifest_path.empty()) wvc::throw_config("no manifest configured");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly-labeled audio classification pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalFlags flags;
  app.add_option("--seed", flags.seed, "override the configured seed");
  app.add_option("--threads", flags.threads, "worker threads (training requires 1)");

  std::string config_path, out_dir, manifest, vocab_path, checkpoint, features;
  std::vector<std::string> run_dirs;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--config", config_path, "synth config json");
  synth->add_option("--out", out_dir, "output directory")->required();

  CLI::App* featurize = app.add_subcommand("featurize", "manifest -> patch cache");
  featurize->add_option("--manifest", manifest)->required();
  featurize->add_option("--vocab", vocab_path, "vocabulary csv (else derived)");
  featurize->add_option("--out", features, "patch cache path")->required();

  CLI::App* train = app.add_subcommand("train", "train one model");
  train->add_option("--config", config_path)->required();
  train->add_option("--manifest", manifest);
  train->add_option("--out", out_dir);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--config", config_path)->required();
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--manifest", manifest);
  eval->add_option("--out", out_dir);

  CLI::App* embed = app.add_subcommand("embed", "extract embeddings");
  embed->add_option("--config", config_path)->required();
  embed->add_option("--checkpoint", checkpoint)->required();
  embed->add_option("--manifest", manifest);
  embed->add_option("--out", features, "embedding file path")->required();

  CLI::App* transfer = app.add_subcommand(
      "transfer", "embedding vs log-mel baseline comparison");
  transfer->add_option("--config", config_path)->required();
  transfer->add_option("--checkpoint", checkpoint)->required();
  transfer->add_option("--manifest", manifest, "transfer-task manifest");
  transfer->add_option("--out", out_dir);

  CLI::App* sweep = app.add_subcommand("sweep", "label/size sweep driver");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--manifest", manifest);
  sweep->add_option("--out", out_dir);

  CLI::App* report = app.add_subcommand("report", "consolidated run summary");
  report->add_option("--runs", run_dirs, "run directories")->required();
  report->add_option("--out", out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a configuration error
  }

  try {
    if (eval->parsed() || embed->parsed() || featurize->parsed() ||
        report->parsed())
      apply_threads(flags);
    if (synth->parsed()) {
      wvc::SynthConfig cfg;
      if (!config_path.empty()) cfg = synth_config_from_json(slurp(config_path));
      if (flags.seed >= 0) cfg.seed = static_cast<uint64_t>(flags.seed);
      const wvc::SynthResult result = wvc::synth_dataset(cfg, out_dir);
      std::cout << "wrote " << result.manifest.size() << " clips, "
                << result.events.size() << " events, "
                << result.vocabulary.size() << " labels to " << out_dir << "\n";
    } else if (featurize->parsed()) {
      const auto records = wvc::read_manifest(manifest);
      wvc::LabelVocabulary vocab;
      if (!vocab_path.empty()) {
        vocab = wvc::read_vocabulary(vocab_path);
      } else {
        std::map<std::string, int64_t> counts;
        for (const auto& rec : records)
          for (const auto& name : rec.labels) counts[name] += 1;
        vocab = wvc::make_vocabulary(counts);
      }
      wvc::FrontendConfig fe;
      const wvc::PatchStore store = wvc::featurize_manifest(records, vocab, fe);
      std::vector<wvc::LogMelPatch> patches;
      for (int p = 0; p < store.num_patches(); ++p) {
        const auto& meta = store.meta[static_cast<size_t>(p)];
        const auto& clip = store.clips[static_cast<size_t>(meta.clip)];
        wvc::LogMelPatch lp;
        lp.clip_id = clip.clip_id;
        lp.patch_index = meta.patch_index;
        lp.labels = clip.label_ids;
        lp.values.assign(store.patch(p), store.patch(p) + store.dim);
        patches.push_back(std::move(lp));
      }
      wvc::write_patch_cache(features, patches, fe);
      std::cout << "cached " << store.num_patches() << " patches ("
                << store.num_clips() << " clips) to " << features << "\n";
    } else if (train->parsed()) {
      require_single_thread(flags);
      const wvc::ExperimentConfig cfg =
          load_experiment(config_path, flags, manifest, out_dir);
      const wvc::ExperimentResult result = wvc::run_experiment(cfg);
      std::cout << result.summary_json << "\n";
    } else if (eval->parsed()) {
      wvc::ExperimentConfig cfg =
          load_experiment(config_path, flags, manifest, out_dir);
      cfg.train.max_steps = 1;  // unused; evaluation only
      // Rebuild the model and score the balanced eval split.
      const auto records = wvc::read_manifest(cfg.manifest_path);
      wvc::LabelVocabulary vocab =
          cfg.vocabulary_path.empty()
              ? [&records] {
                  std::map<std::string, int64_t> counts;
                  for (const auto& rec : records)
                    for (const auto& name : rec.labels) counts[name] += 1;
                  return wvc::make_vocabulary(counts);
                }()
              : wvc::read_vocabulary(cfg.vocabulary_path);
      const wvc::PatchStore store =
          wvc::featurize_manifest(records, vocab, cfg.frontend);
      const wvc::LabelVocabulary active =
          cfg.train.vocabulary_size > 0 && cfg.train.vocabulary_size < vocab.size()
              ? wvc::restrict_vocabulary(vocab, cfg.train.vocabulary_size)
              : vocab;
      const std::vector<int> label_ids = active.label_ids_ascending();
      wvc::ArchitectureSpec spec = wvc::build_architecture(
          cfg.architecture, static_cast<int>(label_ids.size()),
          cfg.width_factor, cfg.bottleneck);
      wvc::Model model = wvc::build_model(spec, cfg.train.seed);
      wvc::load_checkpoint(checkpoint, model);
      const wvc::SplitIndices split = wvc::split_clips(
          store, cfg.val_fraction, cfg.eval_fraction, cfg.train.seed);
      wvc::DatasetView view = wvc::make_view(store, split.eval, label_ids);
      const auto scores = wvc::score_clips(model, view);
      wvc::MetricsReport rep =
          wvc::evaluate_scores(scores, view.positions, label_ids);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(out_dir + "/per_class.csv") << rep.per_class_csv();
        std::ofstream(out_dir + "/summary.json") << rep.summary_json();
      }
      std::cout << rep.summary_json() << "\n";
    } else if (embed->parsed()) {
      wvc::ExperimentConfig cfg = load_experiment(config_path, flags, manifest, "");
      const auto records = wvc::read_manifest(cfg.manifest_path);
      std::map<std::string, int64_t> counts;
      for (const auto& rec : records)
        for (const auto& name : rec.labels) counts[name] += 1;
      const wvc::LabelVocabulary vocab = wvc::make_vocabulary(counts);
      const wvc::PatchStore store =
          wvc::featurize_manifest(records, vocab, cfg.frontend);
      const uint64_t digest = wvc::checkpoint_digest(checkpoint);
      wvc::ArchitectureSpec spec = wvc::build_architecture(
          cfg.architecture, cfg.train.vocabulary_size > 0
                                ? cfg.train.vocabulary_size
                                : vocab.size(),
          cfg.width_factor, cfg.bottleneck);
      wvc::Model model = wvc::build_model(spec, cfg.train.seed);
      if (model.digest != digest)
        wvc::throw_data("checkpoint does not match the configured architecture");
      wvc::load_checkpoint(checkpoint, model);
      const wvc::PatchStore emb = wvc::extract_embeddings(model, store);
      wvc::write_embeddings(features, emb);
      std::cout << "wrote " << emb.num_patches() << " embeddings (dim "
                << emb.dim << ") to " << features << "\n";
    } else if (transfer->parsed()) {
      require_single_thread(flags);
      wvc::ExperimentConfig cfg =
          load_experiment(config_path, flags, manifest, out_dir);
      const auto records = wvc::read_manifest(cfg.manifest_path);
      std::map<std::string, int64_t> counts;
      for (const auto& rec : records)
        for (const auto& name : rec.labels) counts[name] += 1;
      const wvc::LabelVocabulary vocab = wvc::make_vocabulary(counts);
      const wvc::PatchStore store =
          wvc::featurize_manifest(records, vocab, cfg.frontend);
      wvc::ArchitectureSpec spec = wvc::build_architecture(
          cfg.architecture, cfg.train.vocabulary_size, cfg.width_factor,
          cfg.bottleneck);
      wvc::Model model = wvc::build_model(spec, cfg.train.seed);
      wvc::load_checkpoint(checkpoint, model);
      wvc::TransferConfig tcfg;
      tcfg.train = cfg.train;
      tcfg.eval_per_class = cfg.eval_per_class;
      const wvc::TransferComparison cmp = wvc::run_transfer_comparison(
          model, store, {}, cfg.frontend, tcfg, cfg.eval_fraction,
          cfg.train.seed);
      json j;
      j["embedding"] = {{"auc", cmp.embedding.report.balanced_auc},
                        {"dprime", cmp.embedding.report.balanced_dprime},
                        {"map", cmp.embedding.report.balanced_map},
                        {"input_dim", cmp.embedding.input_dim}};
      j["baseline"] = {{"auc", cmp.baseline.report.balanced_auc},
                       {"dprime", cmp.baseline.report.balanced_dprime},
                       {"map", cmp.baseline.report.balanced_map},
                       {"input_dim", cmp.baseline.input_dim}};
      if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        std::ofstream(cfg.out_dir + "/transfer.json") << j.dump(2);
      }
      std::cout << j.dump(2) << "\n";
    } else if (sweep->parsed()) {
      require_single_thread(flags);
      const wvc::ExperimentConfig cfg =
          load_experiment(config_path, flags, manifest, out_dir);
      const auto rows = wvc::run_sweeps(cfg);
      std::cout << wvc::sweep_csv(rows);
    } else if (report->parsed()) {
      const std::string text = wvc::report_runs(run_dirs);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(out_dir + "/report.txt") << text;
      }
      std::cout << text;
    }
  } catch (const wvc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
