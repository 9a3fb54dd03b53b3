// Copyright 2026 The a4d Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>

#include "a4d/kernels.hpp"

namespace a4d::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// y[0..n) += a * x[0..n)
inline void axpy_inner(int n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  int j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256d y0 = _mm256_loadu_pd(y + j);
    __m256d y1 = _mm256_loadu_pd(y + j + 4);
    __m256d y2 = _mm256_loadu_pd(y + j + 8);
    __m256d y3 = _mm256_loadu_pd(y + j + 12);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j + 4), y1);
    y2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j + 8), y2);
    y3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j + 12), y3);
    _mm256_storeu_pd(y + j, y0);
    _mm256_storeu_pd(y + j + 4, y1);
    _mm256_storeu_pd(y + j + 8, y2);
    _mm256_storeu_pd(y + j + 12, y3);
  }
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(y + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j)));
  }
  for (; j < n; ++j) y[j] += alpha * x[j];
}

double dot(int n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm_nn(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
             int ldc) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<long>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      axpy_inner(n, a[static_cast<long>(i) * lda + p], b + static_cast<long>(p) * ldb, ci);
    }
  }
}

void gemm_nt(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
             int ldc) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      c[static_cast<long>(i) * ldc + j] +=
          dot(k, a + static_cast<long>(i) * lda, b + static_cast<long>(j) * ldb);
    }
  }
}

void gemm_tn(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
             int ldc) {
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<long>(p) * lda;
    const double* bp = b + static_cast<long>(p) * ldb;
    for (int i = 0; i < m; ++i) axpy_inner(n, ap[i], bp, c + static_cast<long>(i) * ldc);
  }
}

void axpy(int n, double alpha, const double* x, double* y) { axpy_inner(n, alpha, x, y); }

void iou_row(const double* box, int n, const double* x1, const double* y1, const double* x2,
             const double* y2, double* out) {
  const __m256d bx1 = _mm256_set1_pd(box[0]);
  const __m256d by1 = _mm256_set1_pd(box[1]);
  const __m256d bx2 = _mm256_set1_pd(box[2]);
  const __m256d by2 = _mm256_set1_pd(box[3]);
  const double area_a = (box[2] - box[0]) * (box[3] - box[1]);
  const __m256d va = _mm256_set1_pd(area_a);
  const __m256d zero = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ox1 = _mm256_loadu_pd(x1 + i);
    const __m256d oy1 = _mm256_loadu_pd(y1 + i);
    const __m256d ox2 = _mm256_loadu_pd(x2 + i);
    const __m256d oy2 = _mm256_loadu_pd(y2 + i);
    const __m256d iw = _mm256_max_pd(zero, _mm256_sub_pd(_mm256_min_pd(bx2, ox2), _mm256_max_pd(bx1, ox1)));
    const __m256d ih = _mm256_max_pd(zero, _mm256_sub_pd(_mm256_min_pd(by2, oy2), _mm256_max_pd(by1, oy1)));
    const __m256d inter = _mm256_mul_pd(iw, ih);
    // Same association order as the scalar kernel so results match bit for bit.
    const __m256d area_b = _mm256_mul_pd(_mm256_sub_pd(ox2, ox1), _mm256_sub_pd(oy2, oy1));
    const __m256d uni = _mm256_sub_pd(_mm256_add_pd(va, area_b), inter);
    const __m256d pos = _mm256_cmp_pd(uni, zero, _CMP_GT_OQ);
    const __m256d q = _mm256_div_pd(inter, _mm256_blendv_pd(_mm256_set1_pd(1.0), uni, pos));
    _mm256_storeu_pd(out + i, _mm256_and_pd(q, pos));
  }
  for (; i < n; ++i) {
    const double iw = std::max(0.0, std::min(box[2], x2[i]) - std::max(box[0], x1[i]));
    const double ih = std::max(0.0, std::min(box[3], y2[i]) - std::max(box[1], y1[i]));
    const double inter = iw * ih;
    const double uni = area_a + (x2[i] - x1[i]) * (y2[i] - y1[i]) - inter;
    out[i] = uni > 0.0 ? inter / uni : 0.0;
  }
}

}  // namespace

const Table kTable = {Isa::kAvx2, gemm_nn, gemm_nt, gemm_tn, dot, axpy, iou_row};

}  // namespace a4d::kernels::avx2

#endif
