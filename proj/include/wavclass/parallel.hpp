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

#ifndef WAVCLASS_PARALLEL_HPP_
#define WAVCLASS_PARALLEL_HPP_

#include <functional>

namespace wvc {

// Worker count for intra-op parallelism. Determinism contract: work is cut
// into a chunk grid that depends only on the problem size, every chunk
// writes a disjoint output range with a fixed internal order, and chunks
// never share accumulators - so results are bit-identical for any thread
// count, including 1.
void set_num_threads(int n);
int num_threads();

// Runs fn(chunk) for chunk in [0, chunks). Sequential ascending when the
// pool is size 1 or chunks == 1.
void parallel_for(long chunks, const std::function<void(long)>& fn);

}  // namespace wvc

#endif  // WAVCLASS_PARALLEL_HPP_
