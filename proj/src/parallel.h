// Copyright 2026 The qtraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QTRAJ_SRC_PARALLEL_H
#define QTRAJ_SRC_PARALLEL_H

#include <cstdint>
#include <exception>

namespace qtraj::internal {

// Runs fn(i) for i in [0, n) on the OpenMP team. Exceptions cannot cross the
// parallel region, so the first one is captured and rethrown afterwards.
template <typename F>
void parallel_for(std::int64_t n, F&& fn) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(qtraj_parallel_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace qtraj::internal

#endif  // QTRAJ_SRC_PARALLEL_H
