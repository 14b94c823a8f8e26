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

#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace attnvad {

// Base error. The CLI maps error categories to exit codes:
// UsageError -> 1, generic/data errors -> 2, NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags, bad config keys, malformed command lines.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed input files, misaligned datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

// Tensor shape violations; message names the operation and both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required (divergence, log of
// non-positive input, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Deterministic random stream (splitmix64). All real-valued draws are
// derived with explicit arithmetic, so identical seeds give identical
// streams on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller.
  double normal();
  // Uniform integer in [0, n). Requires n > 0.
  int64_t uniform_int(int64_t n);

  // Derives an independent stream seed from (base, stream). Used to give
  // every utterance / epoch / run its own reproducible stream.
  static uint64_t mix(uint64_t base, uint64_t stream);

 private:
  uint64_t splitmix_next();
  uint64_t state_;
};

// Runs the tasks on up to `jobs` worker threads and blocks until all have
// finished. Tasks must not share mutable state. If any task throws, the
// first exception (by task order) is rethrown after every worker has joined.
void run_parallel(const std::vector<std::function<void()>>& tasks, int jobs);

// Binary artifacts (checkpoints, feature caches) store raw little-endian
// doubles; refuse to read or write them on other hosts.
inline void require_little_endian() {
  if constexpr (std::endian::native != std::endian::little) {
    throw Error("binary artifacts require a little-endian host");
  }
}

}  // namespace attnvad
