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
#pragma once

// Data-parallel inner loops used by the differentiable ops, the assigner and
// the evaluator. Every kernel has a portable scalar reference and, where the
// CPU allows, an AVX2+FMA variant. The variant is chosen once at first use
// (overridable with A4D_ISA=scalar|avx2 or select()).
//
// All gemm variants accumulate into C; callers clear C when they want "=".

namespace a4d::kernels {

enum class Isa { kScalar, kAvx2 };

const char* isa_name(Isa isa);

struct Table {
  Isa isa;
  // C[M,N] += A[M,K] * B[K,N]
  void (*gemm_nn)(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
                  int ldc);
  // C[M,N] += A[M,K] * B[N,K]^T
  void (*gemm_nt)(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
                  int ldc);
  // C[M,N] += A[K,M]^T * B[K,N]
  void (*gemm_tn)(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
                  int ldc);
  double (*dot)(int n, const double* x, const double* y);
  // y += alpha * x
  void (*axpy)(int n, double alpha, const double* x, double* y);
  // out[i] = IoU(box, (x1[i], y1[i], x2[i], y2[i])), 0 when the union is empty.
  void (*iou_row)(const double* box, int n, const double* x1, const double* y1, const double* x2,
                  const double* y2, double* out);
};

bool supported(Isa isa);
Isa best_supported();

// Kernel table for a specific ISA; throws InvalidInput if the CPU lacks it.
const Table& table(Isa isa);

// Kernel table used by the library.
const Table& active();

// Overrides the active ISA for the whole process. Not thread safe; call it
// before starting work.
void select(Isa isa);

namespace scalar {
extern const Table kTable;
}
#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
extern const Table kTable;
}
#endif

}  // namespace a4d::kernels
