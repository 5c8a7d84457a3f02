// Copyright 2026 The Groupwise Authors
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

#ifndef GROUPWISE__CORE__PARALLEL_HPP_
#define GROUPWISE__CORE__PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace groupwise
{

/// Runs fn(i) for i in [0, n) on up to \p jobs threads using a static
/// partition. fn must write only to slot i of its outputs. The first
/// exception thrown (lowest index) is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn && fn)
{
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::size_t error_at = n;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      const std::size_t lo = n * w / jobs;
      const std::size_t hi = n * (w + 1) / jobs;
      for (std::size_t i = lo; i < hi; ++i) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (i < error_at) {
            error_at = i;
            error = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto & t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace groupwise

#endif  // GROUPWISE__CORE__PARALLEL_HPP_
