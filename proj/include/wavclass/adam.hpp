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

#ifndef WAVCLASS_ADAM_HPP_
#define WAVCLASS_ADAM_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "wavclass/error.hpp"
#include "wavclass/layers.hpp"
#include "wavclass/tensor.hpp"

namespace wvc {

template <typename T>
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int64_t step_count = 0;
  // Parallel to the trainable parameters, in parameter order.
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;

  void init(const std::vector<Parameter<T>*>& params) {
    first_moment.clear();
    second_moment.clear();
    step_count = 0;
    for (const Parameter<T>* p : params) {
      if (!p->trainable) continue;
      first_moment.emplace_back(p->value.shape);
      second_moment.emplace_back(p->value.shape);
    }
  }
};

// One bias-corrected Adam update over every trainable parameter. Aborts
// before touching any state if a gradient is non-finite.
template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state) {
  std::vector<Parameter<T>*> trainable;
  trainable.reserve(params.size());
  for (Parameter<T>* p : params)
    if (p->trainable) trainable.push_back(p);
  if (trainable.size() != state.first_moment.size())
    throw_config("adam state does not match parameter list");

  for (const Parameter<T>* p : trainable)
    if (!p->grad.all_finite()) throw_numeric("non-finite gradient in " + p->name);

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  for (size_t k = 0; k < trainable.size(); ++k) {
    Parameter<T>* p = trainable[k];
    T* m = state.first_moment[k].data();
    T* v = state.second_moment[k].data();
    T* w = p->value.data();
    const T* g = p->grad.data();
    const size_t n = p->value.numel();
    for (size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = state.beta1 * static_cast<double>(m[i]) + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * static_cast<double>(v[i]) + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) -
                            state.learning_rate * m_hat /
                                (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

}  // namespace wvc

#endif  // WAVCLASS_ADAM_HPP_
