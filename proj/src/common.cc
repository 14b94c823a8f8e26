// Copyright 2026 The attnvad Authors
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

#include "attnvad/common.h"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace attnvad {

void run_parallel(const std::vector<std::function<void()>>& tasks, int jobs) {
  if (jobs < 1) throw UsageError("run_parallel: jobs must be >= 1");
  if (tasks.empty()) return;
  if (jobs == 1) {
    for (const auto& task : tasks) task();
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks.size());
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  size_t n_threads = std::min<size_t>(static_cast<size_t>(jobs), tasks.size());
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

uint64_t Rng::splitmix_next() {
  uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

uint64_t Rng::next_u64() { return splitmix_next(); }

double Rng::uniform() {
  // 53 high bits -> double in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller; u clamped away from 0 so log stays finite.
  double u = uniform();
  if (u < 1e-300) u = 1e-300;
  double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

int64_t Rng::uniform_int(int64_t n) {
  if (n <= 0) throw Error("Rng::uniform_int: n must be positive");
  // Rejection-free multiply-shift; bias is negligible for the small ranges
  // used here but we reject the tail anyway to stay exact.
  uint64_t un = static_cast<uint64_t>(n);
  uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<int64_t>(x % un);
}

uint64_t Rng::mix(uint64_t base, uint64_t stream) {
  Rng r(base ^ (0x9E3779B97F4A7C15ull * (stream + 0x632BE59BD9B4E019ull)));
  return r.next_u64();
}

}  // namespace attnvad
