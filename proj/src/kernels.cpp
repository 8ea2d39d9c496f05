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

#include "wavclass/kernels.hpp"

#include "wavclass/parallel.hpp"

#include <algorithm>
#include <vector>

#if defined(__AVX512F__)
#include <immintrin.h>
#define WVC_ISA_AVX512 1
#elif defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define WVC_ISA_AVX2 1
#endif

namespace wvc::kern {
namespace {

// Reference path; also the double-precision path used by the gradient-check
// harness, where throughput is irrelevant.
template <typename T>
void gemm_nn_generic(T* C, long ldc, const T* A, long a_rs, long a_cs,
                     const T* B, long ldb, long M, long N, long K,
                     bool accumulate) {
  for (long m = 0; m < M; ++m) {
    T* c = C + m * ldc;
    if (!accumulate)
      for (long n = 0; n < N; ++n) c[n] = T(0);
    for (long k = 0; k < K; ++k) {
      const T a = A[m * a_rs + k * a_cs];
      const T* b = B + k * ldb;
      for (long n = 0; n < N; ++n) c[n] += a * b[n];
    }
  }
}

template <typename T>
void gemm_nt_generic(T* C, long ldc, const T* A, long lda, const T* B,
                     long ldb, long M, long N, long P, bool accumulate) {
  for (long m = 0; m < M; ++m) {
    for (long n = 0; n < N; ++n) {
      const T* a = A + m * lda;
      const T* b = B + n * ldb;
      T s = T(0);
      for (long p = 0; p < P; ++p) s += a[p] * b[p];
      T& c = C[m * ldc + n];
      c = accumulate ? c + s : s;
    }
  }
}

#if WVC_ISA_AVX512

// 3 zmm column groups per row -> 48-wide tiles; MR rows of accumulators.
template <int MR>
void kern_nn_f32(const float* A, long a_rs, long a_cs, const float* B,
                 long ldb, float* C, long ldc, long K, int nw, bool acc) {
  const int w0 = nw > 16 ? 16 : nw;
  const int w1 = nw > 32 ? 16 : (nw > 16 ? nw - 16 : 0);
  const int w2 = nw > 32 ? nw - 32 : 0;
  const __mmask16 m0 = static_cast<__mmask16>((1u << w0) - 1u);
  const __mmask16 m1 = static_cast<__mmask16>(w1 ? (1u << w1) - 1u : 0u);
  const __mmask16 m2 = static_cast<__mmask16>(w2 ? (1u << w2) - 1u : 0u);

  __m512 c[MR][3];
  for (int i = 0; i < MR; ++i) {
    if (acc) {
      c[i][0] = _mm512_maskz_loadu_ps(m0, C + i * ldc);
      c[i][1] = m1 ? _mm512_maskz_loadu_ps(m1, C + i * ldc + 16) : _mm512_setzero_ps();
      c[i][2] = m2 ? _mm512_maskz_loadu_ps(m2, C + i * ldc + 32) : _mm512_setzero_ps();
    } else {
      c[i][0] = c[i][1] = c[i][2] = _mm512_setzero_ps();
    }
  }
  for (long k = 0; k < K; ++k) {
    const float* b = B + k * ldb;
    const __m512 b0 = _mm512_maskz_loadu_ps(m0, b);
    const __m512 b1 = m1 ? _mm512_maskz_loadu_ps(m1, b + 16) : _mm512_setzero_ps();
    const __m512 b2 = m2 ? _mm512_maskz_loadu_ps(m2, b + 32) : _mm512_setzero_ps();
    for (int i = 0; i < MR; ++i) {
      const __m512 a = _mm512_set1_ps(A[i * a_rs + k * a_cs]);
      c[i][0] = _mm512_fmadd_ps(a, b0, c[i][0]);
      if (w1) c[i][1] = _mm512_fmadd_ps(a, b1, c[i][1]);
      if (w2) c[i][2] = _mm512_fmadd_ps(a, b2, c[i][2]);
    }
  }
  for (int i = 0; i < MR; ++i) {
    _mm512_mask_storeu_ps(C + i * ldc, m0, c[i][0]);
    if (w1) _mm512_mask_storeu_ps(C + i * ldc + 16, m1, c[i][1]);
    if (w2) _mm512_mask_storeu_ps(C + i * ldc + 32, m2, c[i][2]);
  }
}

void gemm_nn_sweep_f32(float* C, long ldc, const float* A, long a_rs,
                       long a_cs, const float* B, long ldb, long M, long N,
                       long K, bool acc) {
  for (long n = 0; n < N; n += 48) {
    const int nw = static_cast<int>(std::min<long>(48, N - n));
    long m = 0;
    for (; m + 8 <= M; m += 8)
      kern_nn_f32<8>(A + m * a_rs, a_rs, a_cs, B + n, ldb, C + m * ldc + n,
                     ldc, K, nw, acc);
    for (; m + 4 <= M; m += 4)
      kern_nn_f32<4>(A + m * a_rs, a_rs, a_cs, B + n, ldb, C + m * ldc + n,
                     ldc, K, nw, acc);
    for (; m + 2 <= M; m += 2)
      kern_nn_f32<2>(A + m * a_rs, a_rs, a_cs, B + n, ldb, C + m * ldc + n,
                     ldc, K, nw, acc);
    for (; m < M; ++m)
      kern_nn_f32<1>(A + m * a_rs, a_rs, a_cs, B + n, ldb, C + m * ldc + n,
                     ldc, K, nw, acc);
  }
}

// Inner-product kernel: TM x TN tile of dot products over contiguous p.
template <int TM, int TN>
void kern_nt_f32(const float* A, long lda, const float* B, long ldb, float* C,
                 long ldc, long P, bool acc) {
  __m512 s[TM][TN];
  for (int i = 0; i < TM; ++i)
    for (int j = 0; j < TN; ++j) s[i][j] = _mm512_setzero_ps();
  long p = 0;
  for (; p + 16 <= P; p += 16) {
    __m512 av[TM], bv[TN];
    for (int i = 0; i < TM; ++i) av[i] = _mm512_loadu_ps(A + i * lda + p);
    for (int j = 0; j < TN; ++j) bv[j] = _mm512_loadu_ps(B + j * ldb + p);
    for (int i = 0; i < TM; ++i)
      for (int j = 0; j < TN; ++j)
        s[i][j] = _mm512_fmadd_ps(av[i], bv[j], s[i][j]);
  }
  if (p < P) {
    const __mmask16 mk = static_cast<__mmask16>((1u << (P - p)) - 1u);
    __m512 av[TM], bv[TN];
    for (int i = 0; i < TM; ++i) av[i] = _mm512_maskz_loadu_ps(mk, A + i * lda + p);
    for (int j = 0; j < TN; ++j) bv[j] = _mm512_maskz_loadu_ps(mk, B + j * ldb + p);
    for (int i = 0; i < TM; ++i)
      for (int j = 0; j < TN; ++j)
        s[i][j] = _mm512_fmadd_ps(av[i], bv[j], s[i][j]);
  }
  for (int i = 0; i < TM; ++i)
    for (int j = 0; j < TN; ++j) {
      const float v = _mm512_reduce_add_ps(s[i][j]);
      float& c = C[i * ldc + j];
      c = acc ? c + v : v;
    }
}

void gemm_nt_f32(float* C, long ldc, const float* A, long lda, const float* B,
                 long ldb, long M, long N, long P, bool acc) {
  long m = 0;
  for (; m + 4 <= M; m += 4) {
    long n = 0;
    for (; n + 4 <= N; n += 4)
      kern_nt_f32<4, 4>(A + m * lda, lda, B + n * ldb, ldb, C + m * ldc + n,
                        ldc, P, acc);
    for (; n < N; ++n)
      kern_nt_f32<4, 1>(A + m * lda, lda, B + n * ldb, ldb, C + m * ldc + n,
                        ldc, P, acc);
  }
  for (; m < M; ++m) {
    long n = 0;
    for (; n + 4 <= N; n += 4)
      kern_nt_f32<1, 4>(A + m * lda, lda, B + n * ldb, ldb, C + m * ldc + n,
                        ldc, P, acc);
    for (; n < N; ++n)
      kern_nt_f32<1, 1>(A + m * lda, lda, B + n * ldb, ldb, C + m * ldc + n,
                        ldc, P, acc);
  }
}

#elif WVC_ISA_AVX2

// AVX2 fallback: 3 ymm groups -> 24-wide tiles.
inline __m256i tail_mask_avx2(int w) {
  alignas(32) int m[8];
  for (int i = 0; i < 8; ++i) m[i] = i < w ? -1 : 0;
  return _mm256_load_si256(reinterpret_cast<const __m256i*>(m));
}

template <int MR>
void kern_nn_f32(const float* A, long a_rs, long a_cs, const float* B,
                 long ldb, float* C, long ldc, long K, int nw, bool acc) {
  const int w[3] = {std::min(nw, 8), std::clamp(nw - 8, 0, 8),
                    std::clamp(nw - 16, 0, 8)};
  __m256i mk[3];
  for (int g = 0; g < 3; ++g) mk[g] = tail_mask_avx2(w[g]);
  __m256 c[MR][3];
  for (int i = 0; i < MR; ++i)
    for (int g = 0; g < 3; ++g)
      c[i][g] = (acc && w[g]) ? _mm256_maskload_ps(C + i * ldc + 8 * g, mk[g])
                              : _mm256_setzero_ps();
  for (long k = 0; k < K; ++k) {
    const float* b = B + k * ldb;
    __m256 bv[3];
    for (int g = 0; g < 3; ++g)
      bv[g] = w[g] ? _mm256_maskload_ps(b + 8 * g, mk[g]) : _mm256_setzero_ps();
    for (int i = 0; i < MR; ++i) {
      const __m256 a = _mm256_set1_ps(A[i * a_rs + k * a_cs]);
      for (int g = 0; g < 3; ++g)
        if (w[g]) c[i][g] = _mm256_fmadd_ps(a, bv[g], c[i][g]);
    }
  }
  for (int i = 0; i < MR; ++i)
    for (int g = 0; g < 3; ++g)
      if (w[g]) _mm256_maskstore_ps(C + i * ldc + 8 * g, mk[g], c[i][g]);
}

void gemm_nn_sweep_f32(float* C, long ldc, const float* A, long a_rs,
                       long a_cs, const float* B, long ldb, long M, long N,
                       long K, bool acc) {
  for (long n = 0; n < N; n += 24) {
    const int nw = static_cast<int>(std::min<long>(24, N - n));
    long m = 0;
    for (; m + 4 <= M; m += 4)
      kern_nn_f32<4>(A + m * a_rs, a_rs, a_cs, B + n, ldb, C + m * ldc + n,
                     ldc, K, nw, acc);
    for (; m < M; ++m)
      kern_nn_f32<1>(A + m * a_rs, a_rs, a_cs, B + n, ldb, C + m * ldc + n,
                     ldc, K, nw, acc);
  }
}

void gemm_nt_f32(float* C, long ldc, const float* A, long lda, const float* B,
                 long ldb, long M, long N, long P, bool acc) {
  gemm_nt_generic<float>(C, ldc, A, lda, B, ldb, M, N, P, acc);
}

#endif  // ISA selection

#if WVC_ISA_AVX512 || WVC_ISA_AVX2

constexpr long kKc = 256;  // K panel
constexpr long kNc = 480;  // N panel; panel bytes stay well inside L2

#if WVC_ISA_AVX512
constexpr long kNr = 48;
#else
constexpr long kNr = 24;
#endif

// Pack B[kc:kc+kb, nc:nc+nb] into kNr-wide strips, zero-padded on the right,
// so the kernel streams one contiguous row per k step.
void pack_b_panel(std::vector<float>& buf, const float* B, long ldb, long kb,
                  long nb) {
  const long strips = (nb + kNr - 1) / kNr;
  buf.resize(static_cast<size_t>(strips * kb * kNr));
  for (long s = 0; s < strips; ++s) {
    const long n0 = s * kNr;
    const long w = std::min(kNr, nb - n0);
    float* dst = buf.data() + s * kb * kNr;
    for (long k = 0; k < kb; ++k) {
      const float* src = B + k * ldb + n0;
      float* d = dst + k * kNr;
      long j = 0;
      for (; j < w; ++j) d[j] = src[j];
      for (; j < kNr; ++j) d[j] = 0.0f;
    }
  }
}

void gemm_nn_blocked_f32(float* C, long ldc, const float* A, long a_rs,
                         long a_cs, const float* B, long ldb, long M, long N,
                         long K, bool acc) {
  thread_local std::vector<float> panel;
  for (long nc = 0; nc < N; nc += kNc) {
    const long nb = std::min(kNc, N - nc);
    for (long kc = 0; kc < K; kc += kKc) {
      const long kb = std::min(kKc, K - kc);
      pack_b_panel(panel, B + kc * ldb + nc, ldb, kb, nb);
      const bool acc_pass = acc || kc > 0;
      const long strips = (nb + kNr - 1) / kNr;
      for (long s = 0; s < strips; ++s) {
        const long n0 = nc + s * kNr;
        const int nw = static_cast<int>(std::min(kNr, N - n0));
        const float* bp = panel.data() + s * kb * kNr;
        long m = 0;
#if WVC_ISA_AVX512
        for (; m + 8 <= M; m += 8)
          kern_nn_f32<8>(A + m * a_rs + kc * a_cs, a_rs, a_cs, bp, kNr,
                         C + m * ldc + n0, ldc, kb, nw, acc_pass);
        for (; m + 4 <= M; m += 4)
          kern_nn_f32<4>(A + m * a_rs + kc * a_cs, a_rs, a_cs, bp, kNr,
                         C + m * ldc + n0, ldc, kb, nw, acc_pass);
#else
        for (; m + 4 <= M; m += 4)
          kern_nn_f32<4>(A + m * a_rs + kc * a_cs, a_rs, a_cs, bp, kNr,
                         C + m * ldc + n0, ldc, kb, nw, acc_pass);
#endif
        for (; m < M; ++m)
          kern_nn_f32<1>(A + m * a_rs + kc * a_cs, a_rs, a_cs, bp, kNr,
                         C + m * ldc + n0, ldc, kb, nw, acc_pass);
      }
    }
  }
}

#endif  // WVC_ISA_AVX512 || WVC_ISA_AVX2

}  // namespace

void gemm_nn(float* C, long ldc, const float* A, long a_rs, long a_cs,
             const float* B, long ldb, long M, long N, long K,
             bool accumulate) {
#if WVC_ISA_AVX512 || WVC_ISA_AVX2
  // Small operands run straight off B; large ones go through the packed
  // panel path so B traffic stays in cache across row tiles.
  if (K <= kKc || M <= 8) {
    gemm_nn_sweep_f32(C, ldc, A, a_rs, a_cs, B, ldb, M, N, K, accumulate);
  } else {
    gemm_nn_blocked_f32(C, ldc, A, a_rs, a_cs, B, ldb, M, N, K, accumulate);
  }
#else
  gemm_nn_generic<float>(C, ldc, A, a_rs, a_cs, B, ldb, M, N, K, accumulate);
#endif
}

void gemm_nn(double* C, long ldc, const double* A, long a_rs, long a_cs,
             const double* B, long ldb, long M, long N, long K,
             bool accumulate) {
  gemm_nn_generic<double>(C, ldc, A, a_rs, a_cs, B, ldb, M, N, K, accumulate);
}

void gemm_nt(float* C, long ldc, const float* A, long lda, const float* B,
             long ldb, long M, long N, long P, bool accumulate) {
#if WVC_ISA_AVX512 || WVC_ISA_AVX2
  gemm_nt_f32(C, ldc, A, lda, B, ldb, M, N, P, accumulate);
#else
  gemm_nt_generic<float>(C, ldc, A, lda, B, ldb, M, N, P, accumulate);
#endif
}

void gemm_nt(double* C, long ldc, const double* A, long lda, const double* B,
             long ldb, long M, long N, long P, bool accumulate) {
  gemm_nt_generic<double>(C, ldc, A, lda, B, ldb, M, N, P, accumulate);
}

namespace {

template <typename T>
void conv_direct_generic(const ConvGeometry& g, const T* X, const T* W,
                         T* Y, bool accumulate) {
  const long x_plane = static_cast<long>(g.in_h) * g.in_w;
  const long y_plane = static_cast<long>(g.out_h) * g.out_w;
  const long k_total = static_cast<long>(g.in_c) * g.kh * g.kw;
  for (int n = 0; n < g.batch; ++n) {
    for (int co = 0; co < g.out_c; ++co) {
      T* y = Y + (static_cast<long>(co) * g.batch + n) * y_plane;
      const T* wrow = W + static_cast<long>(co) * k_total;
      for (int oy = 0; oy < g.out_h; ++oy) {
        T* yrow = y + static_cast<long>(oy) * g.out_w;
        if (!accumulate)
          for (int ox = 0; ox < g.out_w; ++ox) yrow[ox] = T(0);
        for (int ci = 0; ci < g.in_c; ++ci) {
          const T* xp = X + (static_cast<long>(ci) * g.batch + n) * x_plane;
          for (int ky = 0; ky < g.kh; ++ky) {
            const int iy = oy * g.sh - g.pad_t + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            const T* xrow = xp + static_cast<long>(iy) * g.in_w;
            for (int kx = 0; kx < g.kw; ++kx) {
              const T w = wrow[(static_cast<long>(ci) * g.kh + ky) * g.kw + kx];
              const int shift = kx - g.pad_l;
              const int lo = std::clamp(-shift, 0, g.out_w);
              const int hi = std::clamp(g.in_w - shift, 0, g.out_w);
              const T* s = xrow + shift;
              for (int ox = lo; ox < hi; ++ox) yrow[ox] += w * s[ox];
            }
          }
        }
      }
    }
  }
}

#if WVC_ISA_AVX512

// MR output channels x G 16-lane column groups of one output row; taps use
// masked shifted loads, so padding costs nothing and no panel exists.
template <int MR, int G>
void conv_row_f32(const float* xbase, long x_plane, long x_row, int in_c,
                  int kh, int kw, int iy0, int in_h, const float* W,
                  long k_total, const __mmask16* kx_masks, float* ybase,
                  long y_plane, long y_row_off, const __mmask16* out_masks,
                  int pad_l, bool accumulate) {
  __m512 acc[MR][G];
  for (int m = 0; m < MR; ++m)
    for (int s = 0; s < G; ++s)
      acc[m][s] = accumulate
                      ? _mm512_maskz_loadu_ps(out_masks[s],
                                              ybase + m * y_plane + y_row_off + 16 * s)
                      : _mm512_setzero_ps();
  for (int ci = 0; ci < in_c; ++ci) {
    const float* xp = xbase + ci * x_plane;
    for (int ky = 0; ky < kh; ++ky) {
      const int iy = iy0 + ky;
      if (iy < 0 || iy >= in_h) continue;
      const float* xrow = xp + iy * x_row;
      for (int kx = 0; kx < kw; ++kx) {
        const long k = (static_cast<long>(ci) * kh + ky) * kw + kx;
        const float* src = xrow + kx - pad_l;
        __m512 bv[G];
        for (int s = 0; s < G; ++s)
          bv[s] = _mm512_maskz_loadu_ps(kx_masks[kx * G + s], src + 16 * s);
        for (int m = 0; m < MR; ++m) {
          const __m512 a = _mm512_set1_ps(W[m * k_total + k]);
          for (int s = 0; s < G; ++s)
            acc[m][s] = _mm512_fmadd_ps(a, bv[s], acc[m][s]);
        }
      }
    }
  }
  for (int m = 0; m < MR; ++m)
    for (int s = 0; s < G; ++s)
      _mm512_mask_storeu_ps(ybase + m * y_plane + y_row_off + 16 * s,
                            out_masks[s], acc[m][s]);
}

// Stride-1 same-padded conv over a plane whose width divides the vector
// length: the plane is treated as one flat run, and a per-(group, ky, kx)
// mask zeroes the lanes whose source tap would wrap across a row edge or
// fall outside the image. Narrow deep-stage planes (8 or 4 wide) get full
// vector occupancy this way.
template <int MR, int G>
void conv_flat_rows_f32(const float* xbase, long x_plane, int in_c, int kh,
                        int kw, int in_w, int pad_t, int pad_l,
                        const float* W, long k_total,
                        const __mmask16* masks, const __mmask16* store_masks,
                        float* ybase, long y_plane, bool accumulate) {
  __m512 acc[MR][G];
  for (int m = 0; m < MR; ++m)
    for (int s = 0; s < G; ++s)
      acc[m][s] = accumulate ? _mm512_maskz_loadu_ps(store_masks[s],
                                                     ybase + m * y_plane + 16 * s)
                             : _mm512_setzero_ps();
  for (int ci = 0; ci < in_c; ++ci) {
    const float* xp = xbase + ci * x_plane;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const long k = (static_cast<long>(ci) * kh + ky) * kw + kx;
        const float* src = xp + (ky - pad_t) * in_w + (kx - pad_l);
        const __mmask16* mk = masks + (static_cast<size_t>(ky) * kw + kx) * G;
        __m512 bv[G];
        for (int s = 0; s < G; ++s)
          bv[s] = _mm512_maskz_loadu_ps(mk[s], src + 16 * s);
        for (int m = 0; m < MR; ++m) {
          const __m512 a = _mm512_set1_ps(W[m * k_total + k]);
          for (int s = 0; s < G; ++s)
            acc[m][s] = _mm512_fmadd_ps(a, bv[s], acc[m][s]);
        }
      }
    }
  }
  for (int m = 0; m < MR; ++m)
    for (int s = 0; s < G; ++s)
      _mm512_mask_storeu_ps(ybase + m * y_plane + 16 * s, store_masks[s],
                            acc[m][s]);
}

void conv_direct_flat_f32(const ConvGeometry& g, const float* X,
                          const float* W, float* Y, bool accumulate) {
  const long plane = static_cast<long>(g.in_h) * g.in_w;
  const long k_total = static_cast<long>(g.in_c) * g.kh * g.kw;
  const int groups = static_cast<int>((plane + 15) / 16);
  const long batch_plane = static_cast<long>(g.batch) * plane;

  // masks[(ky*kw + kx)*groups + s]: lane valid iff its source row/col stays
  // inside the image and inside the lane's own row. The final group also
  // drops lanes past the plane end.
  std::vector<__mmask16> masks(static_cast<size_t>(g.kh) * g.kw * groups);
  for (int ky = 0; ky < g.kh; ++ky) {
    for (int kx = 0; kx < g.kw; ++kx) {
      for (int s = 0; s < groups; ++s) {
        uint32_t m = 0;
        for (int lane = 0; lane < 16; ++lane) {
          const long f = 16L * s + lane;
          if (f >= plane) continue;
          const int r = static_cast<int>(f / g.in_w);
          const int c = static_cast<int>(f % g.in_w);
          const int sr = r + ky - g.pad_t;
          const int sc = c + kx - g.pad_l;
          if (sr >= 0 && sr < g.in_h && sc >= 0 && sc < g.in_w)
            m |= 1u << lane;
        }
        masks[(static_cast<size_t>(ky) * g.kw + kx) * groups + s] =
            static_cast<__mmask16>(m);
      }
    }
  }

  std::vector<__mmask16> store_masks(static_cast<size_t>(groups));
  for (int s = 0; s < groups; ++s) {
    uint32_t m = 0;
    for (int lane = 0; lane < 16; ++lane)
      if (16L * s + lane < plane) m |= 1u << lane;
    store_masks[static_cast<size_t>(s)] = static_cast<__mmask16>(m);
  }

  parallel_for(g.batch, [&](long n) {
    const float* xb = X + n * plane;
    float* yb = Y + n * plane;
    auto sweep = [&](auto mr_tag, auto g_tag) {
      constexpr int MR = decltype(mr_tag)::value;
      constexpr int G = decltype(g_tag)::value;
      int co = 0;
      for (; co + MR <= g.out_c; co += MR)
        conv_flat_rows_f32<MR, G>(xb, batch_plane, g.in_c, g.kh, g.kw, g.in_w,
                                  g.pad_t, g.pad_l,
                                  W + static_cast<long>(co) * k_total, k_total,
                                  masks.data(), store_masks.data(),
                                  yb + static_cast<long>(co) * batch_plane,
                                  batch_plane, accumulate);
      for (; co < g.out_c; ++co)
        conv_flat_rows_f32<1, G>(xb, batch_plane, g.in_c, g.kh, g.kw, g.in_w,
                                 g.pad_t, g.pad_l,
                                 W + static_cast<long>(co) * k_total, k_total,
                                 masks.data(), store_masks.data(),
                                 yb + static_cast<long>(co) * batch_plane,
                                 batch_plane, accumulate);
    };
    // Accumulator pressure caps the channel tile as the group count grows.
    switch (groups) {
      case 1: sweep(std::integral_constant<int, 8>{}, std::integral_constant<int, 1>{}); break;
      case 2: sweep(std::integral_constant<int, 8>{}, std::integral_constant<int, 2>{}); break;
      case 3: sweep(std::integral_constant<int, 4>{}, std::integral_constant<int, 3>{}); break;
      case 4: sweep(std::integral_constant<int, 4>{}, std::integral_constant<int, 4>{}); break;
      case 5: sweep(std::integral_constant<int, 2>{}, std::integral_constant<int, 5>{}); break;
      default: sweep(std::integral_constant<int, 2>{}, std::integral_constant<int, 6>{}); break;
    }
  });
}

template <int G>
void conv_direct_f32_g(const ConvGeometry& g, const float* X, const float* W,
                       float* Y, bool accumulate) {
  const long x_plane = static_cast<long>(g.in_h) * g.in_w;
  const long y_plane = static_cast<long>(g.out_h) * g.out_w;
  const long k_total = static_cast<long>(g.in_c) * g.kh * g.kw;
  constexpr int MR = G <= 2 ? 8 : 4;

  // Column masks per (kx, group): lanes whose source column stays inside
  // the image; and per-group output masks.
  std::vector<__mmask16> kx_masks(static_cast<size_t>(g.kw) * G);
  for (int kx = 0; kx < g.kw; ++kx) {
    const int shift = kx - g.pad_l;
    const int lo = std::clamp(-shift, 0, g.out_w);
    const int hi = std::clamp(g.in_w - shift, 0, g.out_w);
    for (int s = 0; s < G; ++s) {
      uint32_t m = 0;
      for (int lane = 0; lane < 16; ++lane) {
        const int ox = 16 * s + lane;
        if (ox >= lo && ox < hi) m |= 1u << lane;
      }
      kx_masks[static_cast<size_t>(kx) * G + s] = static_cast<__mmask16>(m);
    }
  }
  std::vector<__mmask16> out_masks(G);
  for (int s = 0; s < G; ++s) {
    uint32_t m = 0;
    for (int lane = 0; lane < 16; ++lane)
      if (16 * s + lane < g.out_w) m |= 1u << lane;
    out_masks[static_cast<size_t>(s)] = static_cast<__mmask16>(m);
  }

  const long batch_x_plane = static_cast<long>(g.batch) * x_plane;
  const long batch_y_plane = static_cast<long>(g.batch) * y_plane;
  parallel_for(g.batch, [&](long n) {
    const float* xb = X + static_cast<long>(n) * x_plane;
    float* yb = Y + static_cast<long>(n) * y_plane;
    for (int oy = 0; oy < g.out_h; ++oy) {
      const int iy0 = oy * g.sh - g.pad_t;
      const long y_off = static_cast<long>(oy) * g.out_w;
      int co = 0;
      for (; co + MR <= g.out_c; co += MR)
        conv_row_f32<MR, G>(xb, batch_x_plane, g.in_w, g.in_c, g.kh, g.kw, iy0,
                            g.in_h, W + static_cast<long>(co) * k_total, k_total,
                            kx_masks.data(), yb + static_cast<long>(co) * batch_y_plane,
                            batch_y_plane, y_off, out_masks.data(), g.pad_l,
                            accumulate);
      for (; co < g.out_c; ++co)
        conv_row_f32<1, G>(xb, batch_x_plane, g.in_w, g.in_c, g.kh, g.kw, iy0,
                           g.in_h, W + static_cast<long>(co) * k_total, k_total,
                           kx_masks.data(), yb + static_cast<long>(co) * batch_y_plane,
                           batch_y_plane, y_off, out_masks.data(), g.pad_l,
                           accumulate);
    }
  });
}

#endif  // WVC_ISA_AVX512

template <typename T>
void transpose_generic(T* out, const T* in, long rows, long cols) {
  constexpr long kBlock = 32;
  for (long r0 = 0; r0 < rows; r0 += kBlock)
    for (long c0 = 0; c0 < cols; c0 += kBlock) {
      const long r1 = std::min(rows, r0 + kBlock);
      const long c1 = std::min(cols, c0 + kBlock);
      for (long r = r0; r < r1; ++r)
        for (long c = c0; c < c1; ++c) out[c * rows + r] = in[r * cols + c];
    }
}
}  // namespace

void transpose(float* out, const float* in, long rows, long cols) {
  transpose_generic(out, in, rows, cols);
}
void transpose(double* out, const double* in, long rows, long cols) {
  transpose_generic(out, in, rows, cols);
}

void conv_direct(const ConvGeometry& g, const float* X, const float* W,
                 float* Y, bool accumulate) {
#if WVC_ISA_AVX512
  const long plane = static_cast<long>(g.in_h) * g.in_w;
  if (g.sh == 1 && g.out_h == g.in_h && g.out_w == g.in_w &&
      g.in_w <= 16 && 16 % g.in_w == 0 && (plane + 15) / 16 <= 6) {
    conv_direct_flat_f32(g, X, W, Y, accumulate);
    return;
  }
  const int groups = (g.out_w + 15) / 16;
  switch (groups) {
    case 1: conv_direct_f32_g<1>(g, X, W, Y, accumulate); return;
    case 2: conv_direct_f32_g<2>(g, X, W, Y, accumulate); return;
    case 3: conv_direct_f32_g<3>(g, X, W, Y, accumulate); return;
    case 4: conv_direct_f32_g<4>(g, X, W, Y, accumulate); return;
    default: break;  // wider rows fall through to the generic path
  }
#endif
  conv_direct_generic(g, X, W, Y, accumulate);
}

void conv_direct(const ConvGeometry& g, const double* X, const double* W,
                 double* Y, bool accumulate) {
  conv_direct_generic(g, X, W, Y, accumulate);
}

const char* isa_name() {
#if WVC_ISA_AVX512
  return "avx512";
#elif WVC_ISA_AVX2
  return "avx2";
#else
  return "scalar";
#endif
}

}  // namespace wvc::kern
