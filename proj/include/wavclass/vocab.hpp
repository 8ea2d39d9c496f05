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

#ifndef WAVCLASS_VOCAB_HPP_
#define WAVCLASS_VOCAB_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace wvc {

struct VocabEntry {
  int label_id = 0;
  std::string name;
  int64_t frequency = 0;  // count over training clips
};

// Entries ordered by descending frequency; ties resolve by ascending id so
// the ranking is stable.
struct LabelVocabulary {
  std::vector<VocabEntry> entries;

  int size() const { return static_cast<int>(entries.size()); }
  const VocabEntry* find_by_name(const std::string& name) const;
  const VocabEntry* find_by_id(int label_id) const;
  // Active label ids in ascending order (the class-axis convention used by
  // targets and metrics).
  std::vector<int> label_ids_ascending() const;
};

LabelVocabulary make_vocabulary(const std::map<std::string, int64_t>& counts);

// Top-k most frequent labels retained, 1 <= top_k <= size.
LabelVocabulary restrict_vocabulary(const LabelVocabulary& vocab, int top_k);

// CSV columns: name,id,frequency.
std::string vocabulary_to_csv(const LabelVocabulary& vocab);
LabelVocabulary vocabulary_from_csv(const std::string& text);
void write_vocabulary(const std::string& path, const LabelVocabulary& vocab);
LabelVocabulary read_vocabulary(const std::string& path);

}  // namespace wvc

#endif  // WAVCLASS_VOCAB_HPP_
