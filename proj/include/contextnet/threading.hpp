/* Copyright 2026 The ContextNet Authors. All Rights Reserved.

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

#ifndef CONTEXTNET_THREADING_HPP_
#define CONTEXTNET_THREADING_HPP_

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace contextnet {

// Worker cap: CONTEXTNET_THREADS when set, otherwise the machine's cores.
inline int max_threads() {
  if (const char* env = std::getenv("CONTEXTNET_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Deterministic parallel map over [0, n): work item i always runs as item i,
// so results are independent of the thread count.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
  const int threads = std::min<std::int64_t>(max_threads(), n);
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([w, threads, n, &fn] {
      for (std::int64_t i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace contextnet

#endif  // CONTEXTNET_THREADING_HPP_
