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
#include <atomic>
#include <cstdlib>
#include <string>

#include "a4d/error.hpp"
#include "a4d/kernels.hpp"

namespace a4d::kernels {
namespace {

std::atomic<const Table*> g_active{nullptr};

const Table* resolve_default() {
  if (const char* env = std::getenv("A4D_ISA")) {
    const std::string want(env);
    if (want == "scalar") return &scalar::kTable;
    if (want == "avx2" && supported(Isa::kAvx2)) return &table(Isa::kAvx2);
  }
  return &table(best_supported());
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa best_supported() { return supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar; }

const Table& table(Isa isa) {
  if (!supported(isa)) throw InvalidInput(std::string("kernel ISA not supported on this CPU: ") + isa_name(isa));
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::kAvx2) return avx2::kTable;
#endif
  return scalar::kTable;
}

const Table& active() {
  const Table* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = resolve_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void select(Isa isa) { g_active.store(&table(isa), std::memory_order_release); }

}  // namespace a4d::kernels
