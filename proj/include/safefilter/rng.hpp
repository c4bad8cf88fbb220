// Copyright 2026 The safefilter Authors
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

#include <cstddef>
#include <cstdint>

namespace safefilter {

/// Counter-based SplitMix64 stream.
///
/// The k-th output (k = 1, 2, ...) is mix(seed + k * 0x9E3779B97F4A7C15), where mix is the
/// SplitMix64 finalizer. The sequence therefore depends only on (seed, k) and is bit-identical
/// on every platform. A stream is single-owner; use split() to hand independent streams to
/// workers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) built from the top 53 bits of next_u64().
  double uniform();

  /// Uniform integer in [0, n) by Lemire's multiply-shift with rejection. n must be > 0.
  std::size_t uniform_index(std::size_t n);

  /// Independent child stream keyed by `stream`; does not advance this stream.
  RngStream split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

}  // namespace safefilter
