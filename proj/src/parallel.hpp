// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace polykan::detail {

/// Static block partition of [0, count) over `workers` threads; the calling
/// thread takes the first block. fn(begin, end, worker) must only write
/// state owned by its range. The first exception raised is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  if (count == 0) return;
  const std::size_t w = std::clamp<std::size_t>(workers, 1, count);
  if (w == 1) {
    fn(std::size_t{0}, count, 0u);
    return;
  }
  const std::size_t chunk = (count + w - 1) / w;
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  threads.reserve(w - 1);
  auto run = [&](std::size_t id) {
    const std::size_t begin = id * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) return;
    try {
      fn(begin, end, static_cast<unsigned>(id));
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  for (std::size_t id = 1; id < w; ++id) threads.emplace_back(run, id);
  run(0);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace polykan::detail
