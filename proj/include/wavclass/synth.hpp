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

#ifndef WAVCLASS_SYNTH_HPP_
#define WAVCLASS_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "wavclass/data.hpp"
#include "wavclass/frontend.hpp"
#include "wavclass/vocab.hpp"

namespace wvc {

// Weakly-labeled synthetic corpus: each clip is low-level background noise
// plus a few spectrally distinct events; the clip's label set is exactly the
// classes of the events it contains, and at least uninformative_fraction of
// its duration is event-free. Per-clip generators are seeded by
// hash(seed, clip_id), so corpora are reproducible clip by clip.
struct SynthConfig {
  uint64_t seed = 42;
  int num_clips = 2000;
  double min_duration_s = 4.0;
  double max_duration_s = 10.0;
  std::vector<std::string> event_classes = {
      "tone-low", "tone-mid", "tone-high", "white-noise",
      "filtered-noise", "chirp-up", "chirp-down", "am-tone"};
  int min_events = 1;
  int max_events = 3;
  double min_event_s = 0.5;
  double max_event_s = 2.5;
  double snr_db = 12.0;
  double uninformative_fraction = 0.25;
  std::string id_prefix = "clip";

  void validate() const;
};

struct EventLogRow {
  std::string clip_id;
  std::string event_class;
  double start_s = 0.0;
  double end_s = 0.0;
};

// Renders one clip in memory; appends its ground-truth event intervals.
WaveformClip synth_clip(const SynthConfig& config, const std::string& clip_id,
                        std::vector<EventLogRow>* events);

struct SynthResult {
  std::vector<ManifestRecord> manifest;
  std::vector<EventLogRow> events;
  LabelVocabulary vocabulary;
};

// Writes out_dir/audio/*.wav, manifest.jsonl, vocabulary.csv and events.csv.
SynthResult synth_dataset(const SynthConfig& config, const std::string& out_dir);

std::string events_to_csv(const std::vector<EventLogRow>& events);
std::vector<EventLogRow> events_from_csv(const std::string& text);

}  // namespace wvc

#endif  // WAVCLASS_SYNTH_HPP_
