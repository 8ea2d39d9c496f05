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

#ifndef WAVCLASS_TENSOR_HPP_
#define WAVCLASS_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "wavclass/error.hpp"

namespace wvc {

// Dense row-major tensor. Images use [N, C, H, W]; matrices [rows, cols].
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> values;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    values.assign(numel_of(shape), T(0));
  }
  Tensor(std::vector<int> s, std::vector<T> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (numel_of(shape) != values.size())
      throw_config("tensor shape does not match value count");
  }

  static size_t numel_of(const std::vector<int>& s) {
    if (s.empty()) throw_config("empty tensor shape");
    size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw_config("non-positive tensor dimension");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  size_t numel() const { return values.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  T* data() { return values.data(); }
  const T* data() const { return values.data(); }

  void fill(T v) { std::fill(values.begin(), values.end(), v); }
  void zero() { fill(T(0)); }

  void reshape(std::vector<int> s) {
    if (numel_of(s) != values.size()) throw_config("reshape changes element count");
    shape = std::move(s);
  }

  // Reallocate for a new leading (batch) dimension, keeping trailing dims.
  void resize_batch(int n) {
    std::vector<int> s = shape;
    s[0] = n;
    if (numel_of(s) != values.size()) values.assign(numel_of(s), T(0));
    shape = std::move(s);
  }

  bool all_finite() const {
    for (const T& v : values)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

inline std::string shape_string(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace wvc

#endif  // WAVCLASS_TENSOR_HPP_
