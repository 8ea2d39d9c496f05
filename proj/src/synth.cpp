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

#include "wavclass/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "wavclass/wav.hpp"

namespace wvc {
namespace {

constexpr int kRate = 16000;
constexpr double kTwoPi = 6.283185307179586476925287;
// Tones near the nominal event amplitude have this RMS; the background noise
// floor is set snr_db below it.
constexpr double kNominalEventRms = 0.15;
constexpr double kRampSeconds = 0.010;

struct Interval {
  int start, end;  // samples
};

double coverage_with(const std::vector<Interval>& placed, Interval extra) {
  std::vector<Interval> all = placed;
  all.push_back(extra);
  std::sort(all.begin(), all.end(),
            [](const Interval& a, const Interval& b) { return a.start < b.start; });
  double covered = 0.0;
  int cur_start = all[0].start, cur_end = all[0].end;
  for (size_t i = 1; i < all.size(); ++i) {
    if (all[i].start <= cur_end) {
      cur_end = std::max(cur_end, all[i].end);
    } else {
      covered += cur_end - cur_start;
      cur_start = all[i].start;
      cur_end = all[i].end;
    }
  }
  covered += cur_end - cur_start;
  return covered;
}

// Amplitude envelope with short cosine ramps so events don't click.
double envelope(int i, int n) {
  const int ramp = std::min(static_cast<int>(kRampSeconds * kRate), n / 4);
  if (ramp == 0) return 1.0;
  if (i < ramp) return 0.5 - 0.5 * std::cos(M_PI * i / ramp);
  if (i >= n - ramp) return 0.5 - 0.5 * std::cos(M_PI * (n - 1 - i) / ramp);
  return 1.0;
}

void render_event(const std::string& cls, Rng& rng, double amp,
                  std::vector<double>& buf) {
  const int n = static_cast<int>(buf.size());
  const double jitter = rng.uniform(0.85, 1.15);
  const double dur = static_cast<double>(n) / kRate;

  if (cls == "tone-low" || cls == "tone-mid" || cls == "tone-high") {
    const double base = cls == "tone-low" ? 250.0 : cls == "tone-mid" ? 1000.0 : 4000.0;
    const double f = base * jitter;
    const double phase = rng.uniform(0.0, kTwoPi);
    for (int i = 0; i < n; ++i)
      buf[static_cast<size_t>(i)] = amp * std::sin(phase + kTwoPi * f * i / kRate);
  } else if (cls == "white-noise") {
    const double sigma = amp / std::sqrt(2.0);
    for (int i = 0; i < n; ++i)
      buf[static_cast<size_t>(i)] = rng.normal(0.0, sigma);
  } else if (cls == "filtered-noise") {
    // Two-pole resonator over white noise, then normalized to the tone RMS.
    const double f = 2000.0 * jitter;
    const double r = 0.97;
    const double theta = kTwoPi * f / kRate;
    const double a1 = 2.0 * r * std::cos(theta);
    const double a2 = -r * r;
    double y1 = 0.0, y2 = 0.0;
    double energy = 0.0;
    for (int i = 0; i < n; ++i) {
      const double y = rng.normal(0.0, 1.0) + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      buf[static_cast<size_t>(i)] = y;
      energy += y * y;
    }
    const double rms = std::sqrt(energy / n);
    const double gain = rms > 0.0 ? amp / (std::sqrt(2.0) * rms) : 0.0;
    for (double& v : buf) v *= gain;
  } else if (cls == "chirp-up" || cls == "chirp-down") {
    double f0 = 400.0 * jitter, f1 = 3200.0 * jitter;
    if (cls == "chirp-down") std::swap(f0, f1);
    const double phase = rng.uniform(0.0, kTwoPi);
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / kRate;
      const double arg = phase + kTwoPi * (f0 * t + (f1 - f0) * t * t / (2.0 * dur));
      buf[static_cast<size_t>(i)] = amp * std::sin(arg);
    }
  } else if (cls == "am-tone") {
    const double fc = 600.0 * jitter;
    const double fm = 10.0;
    const double depth = 0.9;
    const double phase = rng.uniform(0.0, kTwoPi);
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / kRate;
      const double mod = (1.0 + depth * std::sin(kTwoPi * fm * t)) / (1.0 + depth);
      buf[static_cast<size_t>(i)] = amp * mod * std::sin(phase + kTwoPi * fc * t);
    }
  } else {
    throw_config("unknown event class: " + cls);
  }
  for (int i = 0; i < n; ++i) buf[static_cast<size_t>(i)] *= envelope(i, n);
}

}  // namespace

void SynthConfig::validate() const {
  if (num_clips < 1) throw_config("num_clips must be positive");
  if (min_duration_s <= 0 || max_duration_s < min_duration_s)
    throw_config("invalid clip duration range");
  if (min_event_s <= 0 || max_event_s < min_event_s)
    throw_config("invalid event duration range");
  if (min_events < 1 || max_events < min_events)
    throw_config("invalid events-per-clip range");
  if (uninformative_fraction < 0.0 || uninformative_fraction >= 1.0)
    throw_config("uninformative_fraction must be in [0, 1)");
  if (event_classes.empty()) throw_config("no event classes configured");
}

WaveformClip synth_clip(const SynthConfig& config, const std::string& clip_id,
                        std::vector<EventLogRow>* events) {
  Rng rng(derive_seed(config.seed, clip_id));
  const double dur = rng.uniform(config.min_duration_s, config.max_duration_s);
  const int n = static_cast<int>(dur * kRate);

  // Background distractor noise, snr_db below the nominal event level.
  const double noise_rms = kNominalEventRms / std::pow(10.0, config.snr_db / 20.0);
  std::vector<double> mix(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) mix[static_cast<size_t>(i)] = rng.normal(0.0, noise_rms);

  const double budget = (1.0 - config.uninformative_fraction) * n;
  const int count = config.min_events +
                    static_cast<int>(rng.below(
                        static_cast<uint64_t>(config.max_events - config.min_events + 1)));
  std::vector<Interval> placed;
  WaveformClip clip;
  clip.clip_id = clip_id;
  for (int e = 0; e < count; ++e) {
    double ev_dur = rng.uniform(config.min_event_s, config.max_event_s);
    ev_dur = std::min(ev_dur, budget / kRate);  // the first event always fits
    const int ev_n = std::max(static_cast<int>(ev_dur * kRate), kRate / 10);
    if (ev_n >= n) continue;
    const int start = static_cast<int>(rng.below(static_cast<uint64_t>(n - ev_n)));
    const Interval iv{start, start + ev_n};
    if (coverage_with(placed, iv) > budget) continue;  // respect the quiet floor
    placed.push_back(iv);

    const size_t cls_index = rng.below(config.event_classes.size());
    const std::string& cls = config.event_classes[cls_index];
    const double amp = rng.uniform(0.15, 0.30);
    std::vector<double> ev(static_cast<size_t>(ev_n));
    render_event(cls, rng, amp, ev);
    for (int i = 0; i < ev_n; ++i) mix[static_cast<size_t>(start + i)] += ev[static_cast<size_t>(i)];

    // Labels are indices into config.event_classes; manifest records carry
    // the names and the vocabulary assigns corpus-level ids.
    clip.labels.insert(static_cast<int>(cls_index));
    if (events)
      events->push_back({clip_id, cls, static_cast<double>(start) / kRate,
                         static_cast<double>(start + ev_n) / kRate});
  }

  if (clip.labels.empty()) {
    // Degenerate configs can reject every placement; clips still need at
    // least one label, so pin a minimum-length event at the front.
    const int ev_n = std::min(n / 2, static_cast<int>(config.min_event_s * kRate));
    const size_t cls_index = rng.below(config.event_classes.size());
    std::vector<double> ev(static_cast<size_t>(ev_n));
    render_event(config.event_classes[cls_index], rng, 0.2, ev);
    for (int i = 0; i < ev_n; ++i) mix[static_cast<size_t>(i)] += ev[static_cast<size_t>(i)];
    clip.labels.insert(static_cast<int>(cls_index));
    if (events)
      events->push_back({clip_id, config.event_classes[cls_index], 0.0,
                         static_cast<double>(ev_n) / kRate});
  }

  clip.sample_rate_hz = kRate;
  clip.samples.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    clip.samples[static_cast<size_t>(i)] =
        static_cast<float>(std::clamp(mix[static_cast<size_t>(i)], -1.0, 1.0));
  return clip;
}

SynthResult synth_dataset(const SynthConfig& config, const std::string& out_dir) {
  config.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "audio", ec);
  if (ec) throw_data("cannot create output directory: " + out_dir);

  SynthResult result;
  std::map<std::string, int64_t> counts;
  int digits = 1;
  for (int v = config.num_clips; v >= 10; v /= 10) ++digits;

  for (int i = 0; i < config.num_clips; ++i) {
    std::ostringstream id;
    id << config.id_prefix;
    std::string num = std::to_string(i);
    id << std::string(static_cast<size_t>(std::max(0, digits + 1 - static_cast<int>(num.size()))), '0') << num;
    const std::string clip_id = id.str();

    std::vector<EventLogRow> clip_events;
    const WaveformClip clip = synth_clip(config, clip_id, &clip_events);

    const std::string wav_path =
        (fs::path(out_dir) / "audio" / (clip_id + ".wav")).string();
    write_wav(wav_path, clip.samples, clip.sample_rate_hz);

    ManifestRecord rec;
    rec.clip_id = clip_id;
    rec.path = wav_path;
    std::set<std::string> names;
    for (const EventLogRow& row : clip_events) names.insert(row.event_class);
    rec.labels.assign(names.begin(), names.end());
    for (const std::string& name : names) counts[name] += 1;
    result.manifest.push_back(std::move(rec));
    for (EventLogRow& row : clip_events) result.events.push_back(std::move(row));
  }

  result.vocabulary = make_vocabulary(counts);
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), result.manifest);
  write_vocabulary((fs::path(out_dir) / "vocabulary.csv").string(),
                   result.vocabulary);
  std::ofstream ev((fs::path(out_dir) / "events.csv").string(), std::ios::trunc);
  ev << events_to_csv(result.events);
  return result;
}

std::string events_to_csv(const std::vector<EventLogRow>& events) {
  std::ostringstream out;
  out << "clip_id,class,start_s,end_s\n";
  out.precision(9);
  for (const EventLogRow& e : events)
    out << e.clip_id << "," << e.event_class << "," << e.start_s << ","
        << e.end_s << "\n";
  return out.str();
}

std::vector<EventLogRow> events_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "clip_id,class,start_s,end_s")
    throw_data("bad events csv header");
  std::vector<EventLogRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    EventLogRow e;
    std::string field;
    std::getline(row, e.clip_id, ',');
    std::getline(row, e.event_class, ',');
    std::getline(row, field, ',');
    e.start_s = std::stod(field);
    std::getline(row, field, ',');
    e.end_s = std::stod(field);
    rows.push_back(std::move(e));
  }
  return rows;
}

}  // namespace wvc
