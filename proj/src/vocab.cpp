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

#include "wavclass/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "wavclass/error.hpp"

namespace wvc {

const VocabEntry* LabelVocabulary::find_by_name(const std::string& name) const {
  for (const VocabEntry& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

const VocabEntry* LabelVocabulary::find_by_id(int label_id) const {
  for (const VocabEntry& e : entries)
    if (e.label_id == label_id) return &e;
  return nullptr;
}

std::vector<int> LabelVocabulary::label_ids_ascending() const {
  std::vector<int> ids;
  ids.reserve(entries.size());
  for (const VocabEntry& e : entries) ids.push_back(e.label_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {
void sort_entries(std::vector<VocabEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const VocabEntry& a, const VocabEntry& b) {
              if (a.frequency != b.frequency) return a.frequency > b.frequency;
              return a.label_id < b.label_id;
            });
}
}  // namespace

LabelVocabulary make_vocabulary(const std::map<std::string, int64_t>& counts) {
  LabelVocabulary vocab;
  int next_id = 0;
  for (const auto& [name, freq] : counts) {
    if (freq < 1) throw_data("label '" + name + "' has zero frequency");
    vocab.entries.push_back({next_id++, name, freq});
  }
  sort_entries(vocab.entries);
  return vocab;
}

LabelVocabulary restrict_vocabulary(const LabelVocabulary& vocab, int top_k) {
  if (top_k < 1 || top_k > vocab.size())
    throw_config("top_k out of range: " + std::to_string(top_k));
  LabelVocabulary out;
  out.entries.assign(vocab.entries.begin(), vocab.entries.begin() + top_k);
  return out;
}

std::string vocabulary_to_csv(const LabelVocabulary& vocab) {
  std::ostringstream out;
  out << "name,id,frequency\n";
  for (const VocabEntry& e : vocab.entries)
    out << e.name << "," << e.label_id << "," << e.frequency << "\n";
  return out.str();
}

LabelVocabulary vocabulary_from_csv(const std::string& text) {
  LabelVocabulary vocab;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "name,id,frequency")
    throw_data("bad vocabulary csv header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t c1 = line.find(',');
    const size_t c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw_data("bad vocabulary csv row: " + line);
    VocabEntry e;
    e.name = line.substr(0, c1);
    e.label_id = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
    e.frequency = std::stoll(line.substr(c2 + 1));
    vocab.entries.push_back(std::move(e));
  }
  sort_entries(vocab.entries);
  return vocab;
}

void write_vocabulary(const std::string& path, const LabelVocabulary& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_data("cannot write vocabulary: " + path);
  out << vocabulary_to_csv(vocab);
}

LabelVocabulary read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open vocabulary: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return vocabulary_from_csv(buf.str());
}

}  // namespace wvc
