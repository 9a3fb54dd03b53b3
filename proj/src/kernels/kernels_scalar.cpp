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
#include <algorithm>

#include "a4d/kernels.hpp"

namespace a4d::kernels::scalar {
namespace {

void gemm_nn(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
             int ldc) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<long>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      const double aip = a[static_cast<long>(i) * lda + p];
      const double* bp = b + static_cast<long>(p) * ldb;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

double dot(int n, const double* x, const double* y) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
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
    for (int i = 0; i < m; ++i) {
      const double api = ap[i];
      double* ci = c + static_cast<long>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void axpy(int n, double alpha, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void iou_row(const double* box, int n, const double* x1, const double* y1, const double* x2,
             const double* y2, double* out) {
  const double area_a = (box[2] - box[0]) * (box[3] - box[1]);
  for (int i = 0; i < n; ++i) {
    const double iw = std::max(0.0, std::min(box[2], x2[i]) - std::max(box[0], x1[i]));
    const double ih = std::max(0.0, std::min(box[3], y2[i]) - std::max(box[1], y1[i]));
    const double inter = iw * ih;
    const double uni = area_a + (x2[i] - x1[i]) * (y2[i] - y1[i]) - inter;
    out[i] = uni > 0.0 ? inter / uni : 0.0;
  }
}

}  // namespace

const Table kTable = {Isa::kScalar, gemm_nn, gemm_nt, gemm_tn, dot, axpy, iou_row};

}  // namespace a4d::kernels::scalar
