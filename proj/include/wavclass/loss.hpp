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

#ifndef WAVCLASS_LOSS_HPP_
#define WAVCLASS_LOSS_HPP_

#include <cmath>

#include "wavclass/error.hpp"
#include "wavclass/tensor.hpp"

namespace wvc {

// Multi-label binary cross-entropy: mean over the batch of the per-example
// sum over classes of -[y ln s + (1-y) ln(1-s)]. Scores are clamped to
// [kScoreClamp, 1 - kScoreClamp] before the logs; gradients are zero where
// the clamp is active.
inline constexpr double kScoreClamp = 1e-7;

template <typename T>
double multilabel_bce(const Tensor<T>& scores, const Tensor<T>& targets,
                      Tensor<T>* dscores = nullptr) {
  if (scores.shape != targets.shape)
    throw_config("scores and targets must share a shape");
  if (scores.rank() != 2) throw_config("multilabel_bce expects [N, C]");
  const int n = scores.dim(0);

  if (dscores) {
    dscores->shape = scores.shape;
    dscores->values.assign(scores.numel(), T(0));
  }

  double total = 0.0;
  for (size_t i = 0; i < scores.numel(); ++i) {
    const double y = static_cast<double>(targets.values[i]);
    if (y != 0.0 && y != 1.0) throw_config("invalid target");
    const double raw = static_cast<double>(scores.values[i]);
    const bool clamped = raw < kScoreClamp || raw > 1.0 - kScoreClamp;
    const double s = clamped
                         ? (raw < kScoreClamp ? kScoreClamp : 1.0 - kScoreClamp)
                         : raw;
    total -= y * std::log(s) + (1.0 - y) * std::log(1.0 - s);
    if (dscores && !clamped)
      dscores->values[i] =
          static_cast<T>((-y / s + (1.0 - y) / (1.0 - s)) / n);
  }
  return total / n;
}

}  // namespace wvc

#endif  // WAVCLASS_LOSS_HPP_
