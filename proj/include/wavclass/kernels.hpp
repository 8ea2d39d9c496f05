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

#ifndef WAVCLASS_KERNELS_HPP_
#define WAVCLASS_KERNELS_HPP_

#include <cstddef>

namespace wvc::kern {

// C[M,N] (+)= A[M,K] * B[K,N].
//
// A is addressed as A[m*a_rs + k*a_cs], so a transposed operand is just a
// stride swap. B rows must be contiguous: row k starts at B + k*ldb. C rows
// start at C + m*ldc. Accumulation order over k is fixed and ascending in
// every code path, so results are bit-reproducible run to run.
void gemm_nn(float* C, long ldc, const float* A, long a_rs, long a_cs,
             const float* B, long ldb, long M, long N, long K, bool accumulate);
void gemm_nn(double* C, long ldc, const double* A, long a_rs, long a_cs,
             const double* B, long ldb, long M, long N, long K, bool accumulate);

// C[M,N] (+)= sum_p A[m*lda + p] * B[n*ldb + p].
//
// Both operands are contiguous over the reduction index p (an inner-product
// kernel; the transpose of B is implied). Same determinism contract.
void gemm_nt(float* C, long ldc, const float* A, long lda, const float* B,
             long ldb, long M, long N, long P, bool accumulate);
void gemm_nt(double* C, long ldc, const double* A, long lda, const double* B,
             long ldb, long M, long N, long P, bool accumulate);

// out[j*cols + i] = in[i*cols + j]; used to feed transposed activations
// into gemm_nn when computing weight gradients.
void transpose(float* out, const float* in, long rows, long cols);
void transpose(double* out, const double* in, long rows, long cols);

// Direct convolution over channel-major activations, unit column stride:
//   Y[co][n][oy][ox] (+)= sum_{ci,ky,kx} W[co][ci*kh*kw + ky*kw + kx]
//                          * X[ci][n][oy*sh - pad_t + ky][ox - pad_l + kx]
// X plane (ci,n) starts at X + (ci*batch + n)*in_h*in_w, likewise Y with
// out extents. Out-of-image taps read as zero. No lowered panel is ever
// materialized, which is what makes wide-plane layers cheap.
struct ConvGeometry {
  int batch, in_c, in_h, in_w;
  int out_c, out_h, out_w;
  int kh, kw, sh;  // column stride is 1
  int pad_t, pad_l;
};
void conv_direct(const ConvGeometry& g, const float* X, const float* W,
                 float* Y, bool accumulate);
void conv_direct(const ConvGeometry& g, const double* X, const double* W,
                 double* Y, bool accumulate);

const char* isa_name();  // "avx512" | "avx2" | "scalar"

}  // namespace wvc::kern

#endif  // WAVCLASS_KERNELS_HPP_
