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

#include <algorithm>
#include <cmath>
#include <limits>

#include "safefilter/envs.hpp"
#include "safefilter/errors.hpp"
#include "safefilter/mdp.hpp"

using namespace safefilter;

namespace {

bool has_kind(const ValidationReport& report, const std::string& kind) {
  return std::any_of(report.begin(), report.end(),
                     [&](const Violation& v) { return v.kind == kind; });
}

TabularMdp one_state(std::vector<Transition> row, double reward = 0.0, double discount = 0.9) {
  return TabularMdp(1, 1, {std::move(row)}, {reward}, discount);
}

}  // namespace

TEST_CASE("chain3 is a valid model with deterministic right moves") {
  const auto env = build_chain3();
  CHECK(validate(env.mdp).empty());
  RngStream rng(0);
  CHECK(sample_transition(env.mdp, 0, 1, rng) == 1);
  CHECK(sample_transition(env.mdp, 1, 1, rng) == 2);
  CHECK(env.mdp.r_max() == 1.0);
  CHECK(env.mdp.value_bound() == doctest::Approx(10.0));
}

TEST_CASE("validate reports broken rows") {
  SUBCASE("row sum") {
    const auto mdp = one_state({{0, 0.5}});
    CHECK(has_kind(validate(mdp), "row sum"));
    CHECK_THROWS_AS(require_valid(mdp), SpecError);
  }
  SUBCASE("negative mass") {
    CHECK(has_kind(validate(TabularMdp(2, 1, {{{0, 1.5}, {1, -0.5}}, {{1, 1.0}}}, {0, 0}, 0.9)),
                   "negative mass"));
  }
  SUBCASE("successor index") {
    CHECK(has_kind(validate(one_state({{3, 1.0}})), "successor index"));
  }
  SUBCASE("duplicate successor") {
    CHECK(has_kind(validate(one_state({{0, 0.5}, {0, 0.5}})), "duplicate successor"));
  }
  SUBCASE("tiny mass") {
    CHECK(has_kind(validate(TabularMdp(2, 1, {{{0, 1.0 - 1e-17}, {1, 1e-17}}, {{1, 1.0}}},
                                       {0, 0}, 0.9)),
                   "tiny mass"));
  }
  SUBCASE("non-finite mass and reward") {
    CHECK(has_kind(validate(one_state({{0, std::nan("")}})), "non-finite mass"));
    CHECK(has_kind(validate(one_state({{0, 1.0}}, std::numeric_limits<double>::infinity())),
                   "reward"));
  }
  SUBCASE("discount") {
    CHECK(has_kind(validate(one_state({{0, 1.0}}, 0.0, 1.0)), "discount"));
    CHECK(has_kind(validate(one_state({{0, 1.0}}, 0.0, 0.0)), "discount"));
  }
}

TEST_CASE("row sums within 1e-12 are accepted") {
  CHECK(validate(TabularMdp(2, 1, {{{0, 0.5}, {1, 0.5 + 5e-13}}, {{1, 1.0}}}, {0, 0}, 0.9))
            .empty());
}

TEST_CASE("exact zero probabilities are dropped from the support") {
  const TabularMdp mdp(2, 1, {{{0, 1.0}, {1, 0.0}}, {{1, 1.0}}}, {0, 0}, 0.9);
  CHECK(validate(mdp).empty());
  CHECK(support(mdp, 0, 0) == std::vector<State>{0});
}

TEST_CASE("dimension errors and index errors") {
  CHECK_THROWS_AS(TabularMdp(2, 1, {{{0, 1.0}}}, {0, 0}, 0.9), SpecError);
  CHECK_THROWS_AS(TabularMdp(0, 1, {}, {}, 0.9), SpecError);
  const auto env = build_chain3();
  CHECK_THROWS_AS(env.mdp.kernel(3, 0), IndexError);
  CHECK_THROWS_AS(env.mdp.kernel(0, 2), IndexError);
  CHECK_THROWS_AS(env.mdp.reward(0, 5), IndexError);
}

TEST_CASE("sampling follows the kernel") {
  const TabularMdp mdp(3, 1, {{{1, 0.25}, {2, 0.75}}, {{1, 1.0}}, {{2, 1.0}}}, {0, 0, 0}, 0.9);
  RngStream rng(3);
  int twos = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const State next = sample_transition(mdp, 0, 0, rng);
    REQUIRE((next == 1 || next == 2));
    twos += next == 2 ? 1 : 0;
  }
  CHECK(twos / static_cast<double>(n) == doctest::Approx(0.75).epsilon(0.02));
  CHECK(support(mdp, 0, 0) == std::vector<State>{1, 2});
}

TEST_CASE("SafetySpec failure set") {
  const SafetySpec spec({1.0, 0.0, -0.5, -2.0});
  CHECK(spec.failure_set() == std::vector<State>{2, 3});
  CHECK_FALSE(spec.is_failure(1));
  CHECK_THROWS_AS(SafetySpec({-1.0, -1.0}), SpecError);
  CHECK_THROWS_AS(SafetySpec({}), SpecError);
  CHECK_THROWS_AS(SafetySpec({std::nan("")}), SpecError);
  CHECK_THROWS_AS(require_matching(build_chain3().mdp, SafetySpec({1.0, 1.0})), SpecError);
}

TEST_CASE("tabular policies") {
  const auto det = TabularPolicy::deterministic(3, {2, 0});
  CHECK(det.is_deterministic());
  CHECK(det.mode(0) == 2);
  CHECK(det.support(1) == std::vector<Action>{0});
  const auto uni = TabularPolicy::uniform(2, 4);
  CHECK_FALSE(uni.is_deterministic());
  CHECK(uni.mode(1) == 0);
  CHECK(uni.prob(1, 3) == doctest::Approx(0.25));
  CHECK_THROWS_AS(TabularPolicy(1, 2, {0.5, 0.6}), SpecError);
  CHECK_THROWS_AS(TabularPolicy(1, 2, {1.5, -0.5}), SpecError);
  CHECK_THROWS_AS(TabularPolicy::deterministic(2, {2}), IndexError);

  RngStream rng(1);
  const TabularPolicy mixed(1, 2, {0.3, 0.7});
  int ones = 0;
  for (int i = 0; i < 20000; ++i) {
    ones += mixed.sample(0, rng) == 1 ? 1 : 0;
  }
  CHECK(ones / 20000.0 == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("q tables break ties towards the lowest action") {
  QTable q(2, 3);
  CHECK(q.greedy(0) == 0);
  q(0, 1) = 2.0;
  q(0, 2) = 2.0;
  CHECK(q.greedy(0) == 1);
  CHECK(q.max(0) == 2.0);
  CHECK_THROWS_AS(QTable(2, 2, std::vector<double>{1.0}), SpecError);
}
