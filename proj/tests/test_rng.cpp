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

#include <doctest.h>

#include <array>
#include <stdexcept>
#include <vector>

#include "safefilter/rng.hpp"

using safefilter::RngStream;

TEST_CASE("splitmix64 reference outputs for seed 0") {
  // Published SplitMix64 sequence for seed 0.
  RngStream rng(0);
  CHECK(rng.next_u64() == 0xE220A8397B1DCDAFULL);
  CHECK(rng.next_u64() == 0x6E789E6AA1B965F4ULL);
  CHECK(rng.next_u64() == 0x06C45D188009454FULL);
  CHECK(rng.counter() == 3);
}

TEST_CASE("identical seeds give identical streams") {
  RngStream a(42);
  RngStream b(42);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
  RngStream c(43);
  CHECK(RngStream(42).next_u64() != c.next_u64());
}

TEST_CASE("uniform lies in [0, 1) and has mean close to one half") {
  RngStream rng(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("uniform_index covers the range evenly") {
  RngStream rng(11);
  std::array<int, 7> counts{};
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.uniform_index(counts.size());
    REQUIRE(k < counts.size());
    ++counts[k];
  }
  for (int c : counts) {
    CHECK(c == doctest::Approx(10000).epsilon(0.05));
  }
  CHECK(rng.uniform_index(1) == 0);
  CHECK_THROWS_AS(rng.uniform_index(0), std::invalid_argument);
}

TEST_CASE("split streams are deterministic and do not advance the parent") {
  RngStream parent(5);
  auto child_a = parent.split(1);
  auto child_b = parent.split(1);
  auto other = parent.split(2);
  CHECK(parent.counter() == 0);
  const auto a = child_a.next_u64();
  CHECK(a == child_b.next_u64());
  CHECK(a != other.next_u64());
  CHECK(a != RngStream(5).next_u64());
}
