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

// Image activations are stored channel-major: values[((c*N + n)*H + y)*W + x]
// for a node whose shape reads [N, C, H, W]. With that layout a channel row
// spans the whole batch, so 1x1 convolutions run as single full-batch GEMMs
// with no packing, conv outputs land in final form, and batchnorm reduces
// over contiguous runs. Flatten converts to the row-major [N, D] matrices
// that dense layers and the loss consume.

#include "wavclass/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "wavclass/kernels.hpp"
#include "wavclass/parallel.hpp"

namespace wvc {

namespace {
template <typename T>
size_t item_numel(const Node<T>* n) {
  size_t e = 1;
  for (int d : n->item_shape()) e *= static_cast<size_t>(d);
  return e;
}

// Column budget for lowered panels: layers with small spatial extent gang
// examples together so the GEMM never starves for columns.
constexpr long kPanelCols = 6144;
}  // namespace

// ---------------------------------------------------------------- Node

template <typename T>
void Node<T>::set_batch(int n) {
  batch_ = n;
  std::vector<int> s;
  s.reserve(item_shape_.size() + 1);
  s.push_back(n);
  for (int d : item_shape_) s.push_back(d);
  out.shape = std::move(s);
  out.values.resize(out.numel_of(out.shape));
}

template <typename T>
void Node<T>::ensure_grad() {
  grad.shape = out.shape;
  grad.values.resize(out.values.size());
  grad_ready = false;
}

template <typename T>
void Node<T>::zero_grad_once() {
  if (!grad_ready) {
    std::fill(grad.values.begin(), grad.values.end(), T(0));
    grad_ready = true;
  }
}

// ---------------------------------------------------------------- Input

template <typename T>
InputNode<T>::InputNode(std::vector<int> item_shape) {
  this->name = "input";
  this->item_shape_ = std::move(item_shape);
}

// ---------------------------------------------------------------- Conv

template <typename T>
ConvNode<T>::ConvNode(std::string name, Node<T>* in, int out_channels, int kh_,
                      int kw_, int sh_, int sw_, Padding padding_, bool bias_)
    : kh(kh_), kw(kw_), sh(sh_), sw(sw_), padding(padding_), use_bias(bias_) {
  this->name = std::move(name);
  this->inputs = {in};
  const auto& is = in->item_shape();
  if (is.size() != 3) throw_config("conv input must be [C,H,W]");
  in_c = is[0];
  in_h = is[1];
  in_w = is[2];
  if (sh < 1 || sw < 1) throw_config("conv stride must be >= 1");
  out_c = out_channels;
  out_h = conv_out_dim(in_h, kh, sh, padding);
  out_w = conv_out_dim(in_w, kw, sw, padding);
  pad_t_ = padding == Padding::kSame ? pad_before(in_h, out_h, kh, sh) : 0;
  pad_l_ = padding == Padding::kSame ? pad_before(in_w, out_w, kw, sw) : 0;
  this->item_shape_ = {out_c, out_h, out_w};

  const int k = in_c * kh * kw;
  weight = Parameter<T>(this->name + ".weight", {out_c, k});
  if (use_bias) bias = Parameter<T>(this->name + ".bias", {out_c});
}

template <typename T>
std::vector<Parameter<T>*> ConvNode<T>::parameters() {
  if (use_bias) return {&weight, &bias};
  return {&weight};
}

// Lowers one example into panel columns [col0, col0 + P); row k of the
// panel is (ci, ky, kx) and ldp is the panel's column count.
template <typename T>
void ConvNode<T>::im2col_block(const T* x_base, long x_plane_stride, int n_index,
                               T* dst, long ldp) const {
  for (int ci = 0; ci < in_c; ++ci) {
    const T* plane = x_base + x_plane_stride * ci +
                     static_cast<size_t>(n_index) * in_h * in_w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        T* row = dst + (static_cast<size_t>(ci) * kh * kw + ky * kw + kx) * ldp;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * sh - pad_t_ + ky;
          T* d = row + static_cast<size_t>(oy) * out_w;
          if (iy < 0 || iy >= in_h) {
            for (int j = 0; j < out_w; ++j) d[j] = T(0);
            continue;
          }
          const T* src_row = plane + static_cast<size_t>(iy) * in_w;
          if (sw == 1) {
            const int shift = kx - pad_l_;
            const int lo = std::min(out_w, std::max(0, -shift));
            const int hi = std::max(lo, std::min(out_w, in_w - shift));
            const T* s = src_row + shift;
            int j = 0;
            for (; j < lo; ++j) d[j] = T(0);
            for (; j < hi; ++j) d[j] = s[j];
            for (; j < out_w; ++j) d[j] = T(0);
          } else {
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * sw - pad_l_ + kx;
              d[ox] = (ix >= 0 && ix < in_w) ? src_row[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void ConvNode<T>::col2im_add_block(T* dx_base, long dx_plane_stride,
                                   int n_index, const T* src, long ldp) const {
  for (int ci = 0; ci < in_c; ++ci) {
    T* plane = dx_base + dx_plane_stride * ci +
               static_cast<size_t>(n_index) * in_h * in_w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const T* row = src + (static_cast<size_t>(ci) * kh * kw + ky * kw + kx) * ldp;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * sh - pad_t_ + ky;
          if (iy < 0 || iy >= in_h) continue;
          const T* s_row = row + static_cast<size_t>(oy) * out_w;
          T* dst_row = plane + static_cast<size_t>(iy) * in_w;
          if (sw == 1) {
            const int shift = kx - pad_l_;
            const int lo = std::min(out_w, std::max(0, -shift));
            const int hi = std::max(lo, std::min(out_w, in_w - shift));
            T* d = dst_row + shift;
            for (int j = lo; j < hi; ++j) d[j] += s_row[j];
          } else {
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * sw - pad_l_ + kx;
              if (ix >= 0 && ix < in_w) dst_row[ix] += s_row[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
int ConvNode<T>::chunk_examples() const {
  const long p = static_cast<long>(out_h) * out_w;
  return static_cast<int>(std::max<long>(1, kPanelCols / p));
}

template <typename T>
void ConvNode<T>::add_bias_rows() {
  const int n = this->batch_;
  const long row = static_cast<long>(n) * out_h * out_w;
  for (int co = 0; co < out_c; ++co) {
    const T bv = bias.value.values[static_cast<size_t>(co)];
    T* dst = this->out.data() + static_cast<size_t>(co) * row;
    for (long j = 0; j < row; ++j) dst[j] += bv;
  }
}

template <typename T>
void ConvNode<T>::forward(Phase) {
  Node<T>* in = this->inputs[0];
  const int n = this->batch_;
  const long p = static_cast<long>(out_h) * out_w;
  const long k = static_cast<long>(in_c) * kh * kw;
  const long in_plane_stride = static_cast<long>(n) * in_h * in_w;
  const long out_row = static_cast<long>(n) * p;

  if (is_pointwise()) {
    // Channel rows already are the lowered matrix.
    kern::gemm_nn(this->out.data(), out_row, weight.value.data(), k, 1,
                  in->out.data(), in_plane_stride, out_c, out_row, k,
                  /*accumulate=*/false);
  } else if (sw == 1) {
    const kern::ConvGeometry geo{n,  in_c, in_h, in_w,   out_c, out_h,
                                 out_w, kh,   kw,   sh,  pad_t_, pad_l_};
    kern::conv_direct(geo, in->out.data(), weight.value.data(),
                      this->out.data(), /*accumulate=*/false);
  } else {
    const int chunk = chunk_examples();
    for (int i0 = 0; i0 < n; i0 += chunk) {
      const int cn = std::min(chunk, n - i0);
      const long cols = cn * p;
      panel_.resize(static_cast<size_t>(k) * cols);
      parallel_for(cn, [&](long e) {
        im2col_block(in->out.data(), in_plane_stride,
                     i0 + static_cast<int>(e),
                     panel_.data() + static_cast<size_t>(e) * p, cols);
      });
      kern::gemm_nn(this->out.data() + static_cast<size_t>(i0) * p, out_row,
                    weight.value.data(), k, 1, panel_.data(), cols, out_c,
                    cols, k, /*accumulate=*/false);
    }
  }
  if (use_bias) add_bias_rows();
}

template <typename T>
void ConvNode<T>::backward() {
  Node<T>* in = this->inputs[0];
  const int n = this->batch_;
  const long p = static_cast<long>(out_h) * out_w;
  const long k = static_cast<long>(in_c) * kh * kw;
  const long in_plane_stride = static_cast<long>(n) * in_h * in_w;
  const long out_row = static_cast<long>(n) * p;
  const bool want_dx = in->wants_grad;
  const T* dy = this->grad.data();

  if (want_dx) {
    wt_.resize(static_cast<size_t>(k) * out_c);
    kern::transpose(wt_.data(), weight.value.data(), out_c, k);
  }

  if (use_bias) {
    for (int co = 0; co < out_c; ++co) {
      const T* row = dy + static_cast<size_t>(co) * out_row;
      T s = T(0);
      for (long j = 0; j < out_row; ++j) s += row[j];
      bias.grad.values[static_cast<size_t>(co)] += s;
    }
  }

  if (is_pointwise()) {
    kern::gemm_nt(weight.grad.data(), k, dy, out_row, in->out.data(),
                  in_plane_stride, out_c, k, out_row, /*accumulate=*/true);
    if (want_dx) {
      kern::gemm_nn(in->grad.data(), in_plane_stride, wt_.data(), out_c, 1, dy,
                    out_row, k, out_row, out_c,
                    /*accumulate=*/in->grad_ready);
      in->grad_ready = true;
    }
    return;
  }

  // Weight gradients always go through lowered panels; the panel is built
  // per chunk and immediately consumed by one inner-product GEMM.
  const int chunk = chunk_examples();
  const bool direct_dx = want_dx && sh == 1 && sw == 1;
  const bool scatter_dx = want_dx && !direct_dx;
  if (scatter_dx) in->zero_grad_once();  // col2im scatters sparsely

  for (int i0 = 0; i0 < n; i0 += chunk) {
    const int cn = std::min(chunk, n - i0);
    const long cols = cn * p;
    panel_.resize(static_cast<size_t>(k) * cols);
    parallel_for(cn, [&](long e) {
      im2col_block(in->out.data(), in_plane_stride, i0 + static_cast<int>(e),
                   panel_.data() + static_cast<size_t>(e) * p, cols);
    });
    kern::gemm_nt(weight.grad.data(), k, dy + static_cast<size_t>(i0) * p,
                  out_row, panel_.data(), cols, out_c, k, cols,
                  /*accumulate=*/true);
    if (scatter_dx) {
      dcols_.resize(static_cast<size_t>(k) * cols);
      kern::gemm_nn(dcols_.data(), cols, wt_.data(), out_c, 1,
                    dy + static_cast<size_t>(i0) * p, out_row, k, cols, out_c,
                    /*accumulate=*/false);
      parallel_for(cn, [&](long e) {
        col2im_add_block(in->grad.data(), in_plane_stride,
                         i0 + static_cast<int>(e),
                         dcols_.data() + static_cast<size_t>(e) * p, cols);
      });
    }
  }

  if (direct_dx) {
    // dX is the full correlation of dY with channel-swapped, spatially
    // flipped kernels; the forward direct kernel handles it as-is.
    wt2_.resize(static_cast<size_t>(in_c) * out_c * kh * kw);
    for (int ci = 0; ci < in_c; ++ci)
      for (int co = 0; co < out_c; ++co)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx)
            wt2_[((static_cast<size_t>(ci) * out_c + co) * kh + ky) * kw + kx] =
                weight.value.values[static_cast<size_t>(co) * k +
                                    (static_cast<size_t>(ci) * kh + (kh - 1 - ky)) * kw +
                                    (kw - 1 - kx)];
    const kern::ConvGeometry geo{n,    out_c, out_h, out_w, in_c,
                                 in_h, in_w,  kh,    kw,    1,
                                 kh - 1 - pad_t_, kw - 1 - pad_l_};
    kern::conv_direct(geo, dy, wt2_.data(), in->grad.data(),
                      /*accumulate=*/in->grad_ready);
    in->grad_ready = true;
  }
}

// ---------------------------------------------------------------- Pool

template <typename T>
PoolNode<T>::PoolNode(std::string name, Node<T>* in, PoolKind kind_, int kh_,
                      int kw_, int sh_, int sw_, Padding padding_)
    : kind(kind_), kh(kh_), kw(kw_), sh(sh_), sw(sw_), padding(padding_) {
  this->name = std::move(name);
  this->inputs = {in};
  const auto& is = in->item_shape();
  if (is.size() != 3) throw_config("pool input must be [C,H,W]");
  in_c = is[0];
  in_h = is[1];
  in_w = is[2];
  out_h = conv_out_dim(in_h, kh, sh, padding);
  out_w = conv_out_dim(in_w, kw, sw, padding);
  pad_t_ = padding == Padding::kSame ? pad_before(in_h, out_h, kh, sh) : 0;
  pad_l_ = padding == Padding::kSame ? pad_before(in_w, out_w, kw, sw) : 0;
  this->item_shape_ = {in_c, out_h, out_w};
}

template <typename T>
void PoolNode<T>::forward(Phase) {
  Node<T>* in = this->inputs[0];
  const int n = this->batch_;
  const size_t in_plane = static_cast<size_t>(in_h) * in_w;
  const size_t out_plane = static_cast<size_t>(out_h) * out_w;
  const long planes = static_cast<long>(n) * in_c;
  if (kind == PoolKind::kMax)
    argmax_.resize(static_cast<size_t>(planes) * out_plane);

  parallel_for(planes, [&](long plane_idx) {
    const T* src = in->out.data() + static_cast<size_t>(plane_idx) * in_plane;
    T* dst = this->out.data() + static_cast<size_t>(plane_idx) * out_plane;
    int* amax = kind == PoolKind::kMax
                    ? argmax_.data() + static_cast<size_t>(plane_idx) * out_plane
                    : nullptr;
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        const int y0 = oy * sh - pad_t_;
        const int x0 = ox * sw - pad_l_;
        const int y1 = std::min(y0 + kh, in_h);
        const int x1 = std::min(x0 + kw, in_w);
        const int ys = std::max(y0, 0);
        const int xs = std::max(x0, 0);
        if (kind == PoolKind::kMax) {
          int best = ys * in_w + xs;
          T best_v = src[best];
          for (int y = ys; y < y1; ++y)
            for (int x = xs; x < x1; ++x) {
              const int idx = y * in_w + x;
              if (src[idx] > best_v) {
                best_v = src[idx];
                best = idx;
              }
            }
          dst[oy * out_w + ox] = best_v;
          amax[oy * out_w + ox] = best;
        } else {
          // Mean over the cells inside the input; padding cells are
          // excluded from the count.
          T acc = T(0);
          for (int y = ys; y < y1; ++y)
            for (int x = xs; x < x1; ++x) acc += src[y * in_w + x];
          dst[oy * out_w + ox] =
              acc / static_cast<T>((y1 - ys) * (x1 - xs));
        }
      }
    }
  });
}

template <typename T>
void PoolNode<T>::backward() {
  Node<T>* in = this->inputs[0];
  if (!in->wants_grad) return;
  const int n = this->batch_;
  const size_t in_plane = static_cast<size_t>(in_h) * in_w;
  const size_t out_plane = static_cast<size_t>(out_h) * out_w;
  const long planes = static_cast<long>(n) * in_c;
  in->zero_grad_once();

  parallel_for(planes, [&](long plane_idx) {
    const T* dy = this->grad.data() + static_cast<size_t>(plane_idx) * out_plane;
    T* dx = in->grad.data() + static_cast<size_t>(plane_idx) * in_plane;
    if (kind == PoolKind::kMax) {
      const int* amax = argmax_.data() + static_cast<size_t>(plane_idx) * out_plane;
      for (size_t j = 0; j < out_plane; ++j) dx[amax[j]] += dy[j];
    } else {
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
          const int y0 = oy * sh - pad_t_;
          const int x0 = ox * sw - pad_l_;
          const int y1 = std::min(y0 + kh, in_h);
          const int x1 = std::min(x0 + kw, in_w);
          const int ys = std::max(y0, 0);
          const int xs = std::max(x0, 0);
          const T g = dy[oy * out_w + ox] /
                      static_cast<T>((y1 - ys) * (x1 - xs));
          for (int y = ys; y < y1; ++y)
            for (int x = xs; x < x1; ++x) dx[y * in_w + x] += g;
        }
      }
    }
  });
}

// ---------------------------------------------------------------- Dense

template <typename T>
DenseNode<T>::DenseNode(std::string name, Node<T>* in, int units_, bool bias_)
    : units(units_), use_bias(bias_) {
  this->name = std::move(name);
  this->inputs = {in};
  const auto& is = in->item_shape();
  if (is.size() != 1) throw_config("dense input must be flattened");
  in_dim = is[0];
  this->item_shape_ = {units};
  weight = Parameter<T>(this->name + ".weight", {in_dim, units});
  if (use_bias) bias = Parameter<T>(this->name + ".bias", {units});
}

template <typename T>
std::vector<Parameter<T>*> DenseNode<T>::parameters() {
  if (use_bias) return {&weight, &bias};
  return {&weight};
}

template <typename T>
void DenseNode<T>::forward(Phase) {
  Node<T>* in = this->inputs[0];
  const int n = this->batch_;
  kern::gemm_nn(this->out.data(), units, in->out.data(), in_dim, 1,
                weight.value.data(), units, n, units, in_dim, false);
  if (use_bias) {
    for (int i = 0; i < n; ++i) {
      T* row = this->out.data() + static_cast<size_t>(i) * units;
      const T* b = bias.value.data();
      for (int u = 0; u < units; ++u) row[u] += b[u];
    }
  }
}

template <typename T>
void DenseNode<T>::backward() {
  Node<T>* in = this->inputs[0];
  const int n = this->batch_;
  const T* dy = this->grad.data();

  xt_.resize(static_cast<size_t>(in_dim) * n);
  kern::transpose(xt_.data(), in->out.data(), n, in_dim);
  kern::gemm_nn(weight.grad.data(), units, xt_.data(), n, 1, dy, units,
                in_dim, units, n, /*accumulate=*/true);
  if (use_bias) {
    for (int i = 0; i < n; ++i) {
      const T* row = dy + static_cast<size_t>(i) * units;
      T* db = bias.grad.data();
      for (int u = 0; u < units; ++u) db[u] += row[u];
    }
  }
  if (in->wants_grad) {
    wt_.resize(static_cast<size_t>(units) * in_dim);
    kern::transpose(wt_.data(), weight.value.data(), in_dim, units);
    kern::gemm_nn(in->grad.data(), in_dim, dy, units, 1, wt_.data(), in_dim,
                  n, in_dim, units, /*accumulate=*/in->grad_ready);
    in->grad_ready = true;
  }
}

// ---------------------------------------------------------------- Relu

template <typename T>
ReluNode<T>::ReluNode(std::string name, Node<T>* in) {
  this->name = std::move(name);
  this->inputs = {in};
  this->item_shape_ = in->item_shape();
}

template <typename T>
void ReluNode<T>::forward(Phase) {
  const T* x = this->inputs[0]->out.data();
  T* y = this->out.data();
  const size_t n = this->out.numel();
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void ReluNode<T>::backward() {
  Node<T>* in = this->inputs[0];
  if (!in->wants_grad) return;
  const T* o = this->out.data();
  const T* g = this->grad.data();
  T* d = in->grad.data();
  const size_t n = this->out.numel();
  if (!in->grad_ready) {
    for (size_t i = 0; i < n; ++i) d[i] = o[i] > T(0) ? g[i] : T(0);
    in->grad_ready = true;
  } else {
    for (size_t i = 0; i < n; ++i) d[i] += o[i] > T(0) ? g[i] : T(0);
  }
}

// ---------------------------------------------------------------- Sigmoid

template <typename T>
SigmoidNode<T>::SigmoidNode(std::string name, Node<T>* in) {
  this->name = std::move(name);
  this->inputs = {in};
  this->item_shape_ = in->item_shape();
}

template <typename T>
void SigmoidNode<T>::forward(Phase) {
  const Tensor<T>& x = this->inputs[0]->out;
  for (size_t i = 0; i < x.numel(); ++i) {
    const T v = x.values[i];
    // Two-branch form: never exponentiates a positive argument.
    if (v >= T(0)) {
      const T e = std::exp(-v);
      this->out.values[i] = T(1) / (T(1) + e);
    } else {
      const T e = std::exp(v);
      this->out.values[i] = e / (T(1) + e);
    }
  }
}

template <typename T>
void SigmoidNode<T>::backward() {
  Node<T>* in = this->inputs[0];
  if (!in->wants_grad) return;
  const T* s = this->out.data();
  const T* g = this->grad.data();
  T* d = in->grad.data();
  const size_t n = this->out.numel();
  if (!in->grad_ready) {
    for (size_t i = 0; i < n; ++i) d[i] = g[i] * s[i] * (T(1) - s[i]);
    in->grad_ready = true;
  } else {
    for (size_t i = 0; i < n; ++i) d[i] += g[i] * s[i] * (T(1) - s[i]);
  }
}

// ---------------------------------------------------------------- BatchNorm

template <typename T>
BatchNormNode<T>::BatchNormNode(std::string name, Node<T>* in, double mom,
                                double eps)
    : momentum(mom), epsilon(eps) {
  this->name = std::move(name);
  this->inputs = {in};
  const auto& is = in->item_shape();
  if (is.size() != 3) throw_config("batchnorm input must be [C,H,W]");
  channels = is[0];
  plane_ = is[1] * is[2];
  this->item_shape_ = is;
  scale = Parameter<T>(this->name + ".scale", {channels});
  shift = Parameter<T>(this->name + ".shift", {channels});
  moving_mean = Parameter<T>(this->name + ".moving_mean", {channels}, false);
  moving_var = Parameter<T>(this->name + ".moving_var", {channels}, false);
  scale.value.fill(T(1));
  moving_var.value.fill(T(1));
}

template <typename T>
std::vector<Parameter<T>*> BatchNormNode<T>::parameters() {
  return {&scale, &shift, &moving_mean, &moving_var};
}

namespace {
// Fixed-order unrolled reduction: four partial accumulators recombined in
// a set sequence, deterministic and free of the serial-add latency chain.
template <typename T>
void sum_and_sumsq(const T* x, long n, double* sum_out, double* sumsq_out) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  double q0 = 0, q1 = 0, q2 = 0, q3 = 0;
  long i = 0;
  for (; i + 4 <= n; i += 4) {
    const double v0 = static_cast<double>(x[i]);
    const double v1 = static_cast<double>(x[i + 1]);
    const double v2 = static_cast<double>(x[i + 2]);
    const double v3 = static_cast<double>(x[i + 3]);
    s0 += v0; s1 += v1; s2 += v2; s3 += v3;
    q0 += v0 * v0; q1 += v1 * v1; q2 += v2 * v2; q3 += v3 * v3;
  }
  for (; i < n; ++i) {
    const double v = static_cast<double>(x[i]);
    s0 += v;
    q0 += v * v;
  }
  *sum_out = ((s0 + s1) + (s2 + s3));
  *sumsq_out = ((q0 + q1) + (q2 + q3));
}

template <typename T>
void sum_dy_and_dyx(const T* dy, const T* x, long n, double* sum_dy_out,
                    double* sum_dyx_out) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  double q0 = 0, q1 = 0, q2 = 0, q3 = 0;
  long i = 0;
  for (; i + 4 <= n; i += 4) {
    const double d0 = static_cast<double>(dy[i]);
    const double d1 = static_cast<double>(dy[i + 1]);
    const double d2 = static_cast<double>(dy[i + 2]);
    const double d3 = static_cast<double>(dy[i + 3]);
    s0 += d0; s1 += d1; s2 += d2; s3 += d3;
    q0 += d0 * static_cast<double>(x[i]);
    q1 += d1 * static_cast<double>(x[i + 1]);
    q2 += d2 * static_cast<double>(x[i + 2]);
    q3 += d3 * static_cast<double>(x[i + 3]);
  }
  for (; i < n; ++i) {
    s0 += static_cast<double>(dy[i]);
    q0 += static_cast<double>(dy[i]) * static_cast<double>(x[i]);
  }
  *sum_dy_out = ((s0 + s1) + (s2 + s3));
  *sum_dyx_out = ((q0 + q1) + (q2 + q3));
}
}  // namespace

template <typename T>
void BatchNormNode<T>::forward(Phase phase) {
  Node<T>* in = this->inputs[0];
  const int n = this->batch_;
  last_phase_ = phase;
  batch_mean_.assign(static_cast<size_t>(channels), 0.0);
  batch_invstd_.assign(static_cast<size_t>(channels), 0.0);
  if (phase == Phase::kTrain && n < 2)
    throw_data("degenerate batch: batchnorm training needs batch size >= 2");
  const long run = static_cast<long>(n) * plane_;

  parallel_for(channels, [&](long c) {
    const T* x = in->out.data() + static_cast<size_t>(c) * run;
    T* y = this->out.data() + static_cast<size_t>(c) * run;
    double mean, invstd;
    if (phase == Phase::kTrain) {
      double sum, sumsq;
      sum_and_sumsq(x, run, &sum, &sumsq);
      const double m = static_cast<double>(run);
      mean = sum / m;
      const double var = std::max(0.0, sumsq / m - mean * mean);  // biased
      invstd = 1.0 / std::sqrt(var + epsilon);
      moving_mean.value.values[static_cast<size_t>(c)] = static_cast<T>(
          momentum * static_cast<double>(moving_mean.value.values[static_cast<size_t>(c)]) +
          (1.0 - momentum) * mean);
      moving_var.value.values[static_cast<size_t>(c)] = static_cast<T>(
          momentum * static_cast<double>(moving_var.value.values[static_cast<size_t>(c)]) +
          (1.0 - momentum) * var);
    } else {
      mean = static_cast<double>(moving_mean.value.values[static_cast<size_t>(c)]);
      const double var = static_cast<double>(moving_var.value.values[static_cast<size_t>(c)]);
      invstd = 1.0 / std::sqrt(var + epsilon);
    }
    batch_mean_[static_cast<size_t>(c)] = mean;
    batch_invstd_[static_cast<size_t>(c)] = invstd;

    const double g = static_cast<double>(scale.value.values[static_cast<size_t>(c)]);
    const T a = static_cast<T>(g * invstd);
    const T b = static_cast<T>(
        static_cast<double>(shift.value.values[static_cast<size_t>(c)]) -
        g * invstd * mean);
    for (long j = 0; j < run; ++j) y[j] = a * x[j] + b;
  });
}

template <typename T>
void BatchNormNode<T>::backward() {
  Node<T>* in = this->inputs[0];
  const int n = this->batch_;
  const double m = static_cast<double>(n) * plane_;
  const bool want_dx = in->wants_grad;
  const long run = static_cast<long>(n) * plane_;
  const bool assign = want_dx && !in->grad_ready;

  parallel_for(channels, [&](long c) {
    const double mean = batch_mean_[static_cast<size_t>(c)];
    const double invstd = batch_invstd_[static_cast<size_t>(c)];
    const T* x = in->out.data() + static_cast<size_t>(c) * run;
    const T* dy = this->grad.data() + static_cast<size_t>(c) * run;
    double sum_dy, sum_dy_x;
    sum_dy_and_dyx(dy, x, run, &sum_dy, &sum_dy_x);
    const double sum_dy_xhat = (sum_dy_x - mean * sum_dy) * invstd;
    scale.grad.values[static_cast<size_t>(c)] += static_cast<T>(sum_dy_xhat);
    shift.grad.values[static_cast<size_t>(c)] += static_cast<T>(sum_dy);
    if (!want_dx) return;

    // dx = A*dy + B*x + C with per-channel constants.
    const double g = static_cast<double>(scale.value.values[static_cast<size_t>(c)]);
    const double a = g * invstd;
    double bcoef = 0.0, ccoef = 0.0;
    if (last_phase_ == Phase::kTrain) {
      const double mean_dy = sum_dy / m;
      const double mean_dy_xhat = sum_dy_xhat / m;
      bcoef = -a * invstd * mean_dy_xhat;
      ccoef = -a * mean_dy - bcoef * mean;
    }
    const T av = static_cast<T>(a);
    const T bv = static_cast<T>(bcoef);
    const T cv = static_cast<T>(ccoef);
    T* dx = in->grad.data() + static_cast<size_t>(c) * run;
    if (assign) {
      for (long j = 0; j < run; ++j) dx[j] = av * dy[j] + bv * x[j] + cv;
    } else {
      for (long j = 0; j < run; ++j) dx[j] += av * dy[j] + bv * x[j] + cv;
    }
  });
  if (want_dx) in->grad_ready = true;
}

// ---------------------------------------------------------------- Flatten

template <typename T>
FlattenNode<T>::FlattenNode(std::string name, Node<T>* in) {
  this->name = std::move(name);
  this->inputs = {in};
  int d = 1;
  for (int v : in->item_shape()) d *= v;
  this->item_shape_ = {d};
  from_image_ = in->item_shape().size() == 3;
  if (from_image_) {
    channels_ = in->item_shape()[0];
    plane_ = in->item_shape()[1] * in->item_shape()[2];
  }
}

template <typename T>
void FlattenNode<T>::forward(Phase) {
  Node<T>* in = this->inputs[0];
  if (!from_image_ || channels_ == 1) {
    std::memcpy(this->out.data(), in->out.data(),
                this->out.numel() * sizeof(T));
    return;
  }
  // Channel-major [C][N][P] to row-major [N][C*P].
  const int n = this->batch_;
  for (int c = 0; c < channels_; ++c) {
    for (int i = 0; i < n; ++i) {
      std::memcpy(this->out.data() +
                      (static_cast<size_t>(i) * channels_ + c) * plane_,
                  in->out.data() +
                      (static_cast<size_t>(c) * n + i) * plane_,
                  static_cast<size_t>(plane_) * sizeof(T));
    }
  }
}

template <typename T>
void FlattenNode<T>::backward() {
  Node<T>* in = this->inputs[0];
  if (!in->wants_grad) return;
  const size_t total = this->grad.numel();
  if (!from_image_ || channels_ == 1) {
    if (!in->grad_ready) {
      std::memcpy(in->grad.data(), this->grad.data(), total * sizeof(T));
      in->grad_ready = true;
    } else {
      for (size_t i = 0; i < total; ++i)
        in->grad.values[i] += this->grad.values[i];
    }
    return;
  }
  const int n = this->batch_;
  const bool assign = !in->grad_ready;
  for (int c = 0; c < channels_; ++c) {
    for (int i = 0; i < n; ++i) {
      const T* src = this->grad.data() +
                     (static_cast<size_t>(i) * channels_ + c) * plane_;
      T* dst = in->grad.data() + (static_cast<size_t>(c) * n + i) * plane_;
      if (assign)
        std::memcpy(dst, src, static_cast<size_t>(plane_) * sizeof(T));
      else
        for (int j = 0; j < plane_; ++j) dst[j] += src[j];
    }
  }
  in->grad_ready = true;
}

// ---------------------------------------------------------------- Add

template <typename T>
AddNode<T>::AddNode(std::string name, std::vector<Node<T>*> ins) {
  this->name = std::move(name);
  this->inputs = std::move(ins);
  if (this->inputs.size() < 2) throw_config("add needs at least two inputs");
  this->item_shape_ = this->inputs[0]->item_shape();
  for (Node<T>* in : this->inputs)
    if (in->item_shape() != this->item_shape_)
      throw_config("add inputs must share a shape");
}

template <typename T>
void AddNode<T>::forward(Phase) {
  const size_t n = this->out.numel();
  T* dst = this->out.data();
  if (this->inputs.size() == 2) {
    const T* a = this->inputs[0]->out.data();
    const T* b = this->inputs[1]->out.data();
    for (size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
    return;
  }
  std::memcpy(dst, this->inputs[0]->out.data(), n * sizeof(T));
  for (size_t k = 1; k < this->inputs.size(); ++k) {
    const T* src = this->inputs[k]->out.data();
    for (size_t i = 0; i < n; ++i) dst[i] += src[i];
  }
}

template <typename T>
void AddNode<T>::backward() {
  const size_t n = this->grad.numel();
  for (Node<T>* in : this->inputs) {
    if (!in->wants_grad) continue;
    if (!in->grad_ready) {
      std::memcpy(in->grad.data(), this->grad.data(), n * sizeof(T));
      in->grad_ready = true;
    } else {
      for (size_t i = 0; i < n; ++i)
        in->grad.values[i] += this->grad.values[i];
    }
  }
}

// ---------------------------------------------------------------- Concat

template <typename T>
ConcatNode<T>::ConcatNode(std::string name, std::vector<Node<T>*> ins) {
  this->name = std::move(name);
  this->inputs = std::move(ins);
  if (this->inputs.empty()) throw_config("concat needs inputs");
  const auto& first = this->inputs[0]->item_shape();
  if (first.size() != 3) throw_config("concat inputs must be [C,H,W]");
  int total_c = 0;
  for (Node<T>* in : this->inputs) {
    const auto& is = in->item_shape();
    if (is.size() != 3 || is[1] != first[1] || is[2] != first[2])
      throw_config("concat inputs must share spatial extent");
    channel_offsets_.push_back(total_c);
    total_c += is[0];
  }
  this->item_shape_ = {total_c, first[1], first[2]};
}

// In channel-major layout a concat is a straight buffer concatenation.
template <typename T>
void ConcatNode<T>::forward(Phase) {
  T* dst = this->out.data();
  for (Node<T>* in : this->inputs) {
    std::memcpy(dst, in->out.data(), in->out.numel() * sizeof(T));
    dst += in->out.numel();
  }
}

template <typename T>
void ConcatNode<T>::backward() {
  const T* src = this->grad.data();
  for (Node<T>* in : this->inputs) {
    const size_t block = in->out.numel();
    if (in->wants_grad) {
      if (!in->grad_ready) {
        std::memcpy(in->grad.data(), src, block * sizeof(T));
        in->grad_ready = true;
      } else {
        for (size_t i = 0; i < block; ++i) in->grad.values[i] += src[i];
      }
    }
    src += block;
  }
}

// ---------------------------------------------------------------- Network

template <typename T>
void Network<T>::finalize() {
  params_.clear();
  for (auto& node : nodes_) {
    if (!input_)
      if (auto* in = dynamic_cast<InputNode<T>*>(node.get())) input_ = in;
    for (Parameter<T>* p : node->parameters()) params_.push_back(p);
    // A node's output gradient matters once any trainable parameter sits
    // upstream of it; nodes are in topological order, so one pass works.
    bool wants = false;
    for (Parameter<T>* p : node->parameters()) wants |= p->trainable;
    for (Node<T>* in : node->inputs) wants |= in->wants_grad;
    node->wants_grad = wants;
  }
  if (!input_) throw_config("network has no input node");
}

template <typename T>
void Network<T>::set_input(const T* data, int n) {
  for (auto& node : nodes_) node->set_batch(n);
  const auto& is = input_->item_shape();
  if (is.size() == 3 && is[0] > 1) {
    // User data arrives example-major; internal layout is channel-major.
    const int c_count = is[0];
    const size_t plane = static_cast<size_t>(is[1]) * is[2];
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < c_count; ++c)
        std::memcpy(input_->out.data() + (static_cast<size_t>(c) * n + i) * plane,
                    data + (static_cast<size_t>(i) * c_count + c) * plane,
                    plane * sizeof(T));
  } else {
    std::memcpy(input_->out.data(), data, input_->out.numel() * sizeof(T));
  }
  forward_recorded_ = false;
}

template <typename T>
void Network<T>::forward(Phase phase) {
  for (auto& node : nodes_) node->forward(phase);
  forward_recorded_ = true;
  last_phase_ = phase;
}

template <typename T>
void Network<T>::zero_param_grads() {
  for (Parameter<T>* p : params_) p->grad.zero();
}

template <typename T>
void Network<T>::backward(const Tensor<T>& dscores) {
  if (!forward_recorded_) throw_config("no recorded graph");
  if (dscores.shape != output()->out.shape)
    throw_config("loss gradient shape mismatch");
  zero_param_grads();
  for (auto& node : nodes_)
    if (node->wants_grad) node->ensure_grad();
  std::memcpy(output()->grad.data(), dscores.data(),
              dscores.numel() * sizeof(T));
  output()->grad_ready = true;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node<T>* node = it->get();
    if (!node->wants_grad) continue;  // nothing trainable upstream
    node->backward();
  }
}

template class Node<float>;
template class Node<double>;
template class InputNode<float>;
template class InputNode<double>;
template class ConvNode<float>;
template class ConvNode<double>;
template class PoolNode<float>;
template class PoolNode<double>;
template class DenseNode<float>;
template class DenseNode<double>;
template class ReluNode<float>;
template class ReluNode<double>;
template class SigmoidNode<float>;
template class SigmoidNode<double>;
template class BatchNormNode<float>;
template class BatchNormNode<double>;
template class FlattenNode<float>;
template class FlattenNode<double>;
template class AddNode<float>;
template class AddNode<double>;
template class ConcatNode<float>;
template class ConcatNode<double>;
template class Network<float>;
template class Network<double>;

}  // namespace wvc
