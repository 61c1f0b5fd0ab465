// include/mtsv/runtime.h

// Copyright 2026  The mtsv Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MTSV_RUNTIME_H_
#define MTSV_RUNTIME_H_

#include <cstddef>
#include <functional>

namespace mtsv {

/// Keeps large activation buffers on the heap instead of fresh mmap pages.
/// Training allocates and frees many multi-megabyte tensors per step, and
/// the default glibc thresholds turn each of them into page faults.
void TuneAllocator();

/// Worker count: MTSV_THREADS if set and positive, else hardware
/// concurrency, never less than one.
std::size_t ThreadsFromEnv();

/// Runs fn(i) for i in [0, n) on up to `threads` workers.  Work items are
/// claimed dynamically, so results must not depend on the schedule.  The
/// first exception thrown by any item is rethrown after all workers join.
void ParallelFor(std::size_t n, std::size_t threads,
                 const std::function<void(std::size_t)> &fn);

}  // namespace mtsv

#endif  // MTSV_RUNTIME_H_
