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

#include <cmath>

#include "safefilter/envs.hpp"
#include "safefilter/errors.hpp"
#include "safefilter/verify.hpp"

using namespace safefilter;

namespace {

constexpr Action kChainStay = 0;
constexpr Action kChainRight = 1;

InvarianceResult invariance_of(const Environment& env) {
  return maximal_invariant_set(env.mdp, env.spec);
}

}  // namespace

TEST_CASE("violation probabilities on the fixtures") {
  const auto chain = build_chain3();
  CHECK(violation_probability(chain.mdp, chain.spec,
                              TabularPolicy::deterministic(2, {kChainStay, kChainRight, 0}), 1) ==
        1.0);
  CHECK(violation_probability(chain.mdp, chain.spec,
                              TabularPolicy::deterministic(2, {kChainRight, kChainStay, 0}), 0) ==
        0.0);
  // Uniform play from s0 reaches s1 eventually and then fails with prob 1/2 each step.
  CHECK(violation_probability(chain.mdp, chain.spec, TabularPolicy::uniform(3, 2), 0) ==
        doctest::Approx(1.0).epsilon(1e-12));

  const auto trap = build_trap3();
  for (Action a = 0; a < 2; ++a) {
    const auto pi = TabularPolicy::deterministic(2, {a, a, a});
    CHECK(violation_probability(trap.mdp, trap.spec, pi, 1) == doctest::Approx(1.0));
    CHECK(violation_probability(trap.mdp, trap.spec, pi, 2) == 1.0);
  }
}

TEST_CASE("hitting probabilities solve a geometric chain") {
  // s0 fails with prob 0.3 per step, moves to the absorbing safe s1 with prob 0.2, else stays.
  const TabularMdp mdp(3, 1, {{{0, 0.5}, {1, 0.2}, {2, 0.3}}, {{1, 1.0}}, {{2, 1.0}}},
                       {0, 0, 0}, 0.9);
  const auto h = hitting_probabilities(mdp, SafetySpec({1, 1, -1}),
                                       TabularPolicy::uniform(3, 1));
  CHECK(h[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(h[1] == 0.0);
  CHECK(h[2] == 1.0);
}

TEST_CASE("omega oracle on the fixtures") {
  const auto chain = build_chain3();
  CHECK(omega_star_oracle(chain.mdp, chain.spec) == std::vector<State>{0, 1});
  const auto trap = build_trap3();
  CHECK(omega_star_oracle(trap.mdp, trap.spec) == std::vector<State>{0});
  // Everything fails except one self-looping state.
  const TabularMdp mdp(3, 1, {{{1, 1.0}}, {{1, 1.0}}, {{0, 1.0}}}, {0, 0, 0}, 0.9);
  CHECK(omega_star_oracle(mdp, SafetySpec({-1, 1, -1})) == std::vector<State>{1});
}

TEST_CASE("every check passes on the fixtures") {
  for (const auto& env : {build_chain3(), build_trap3()}) {
    const auto inv = invariance_of(env);
    CHECK(check_lemma1(env.mdp, env.spec, inv).status == CheckStatus::kPass);
    CHECK(check_prop1(env.mdp, env.spec, inv).status == CheckStatus::kPass);
    CHECK(check_filter(env.mdp, env.spec, build_perfect_filter(inv)).status == CheckStatus::kPass);
    CHECK(check_oracle_agreement(env.mdp, env.spec, inv).status == CheckStatus::kPass);
    CHECK(check_maximality(env.mdp, env.spec, inv).status == CheckStatus::kPass);
    CHECK(check_value_equality(env.mdp, inv).status == CheckStatus::kPass);
  }
}

TEST_CASE("outside-set enumeration is vacuous when the safe set covers every non-failure state") {
  const auto env = build_chain3();
  const auto result = check_lemma1(env.mdp, env.spec, invariance_of(env));
  CHECK(result.status == CheckStatus::kPass);
  CHECK(result.detail.find("vacuous") != std::string::npos);
}

TEST_CASE("enumeration above the cap is skipped") {
  GridGoalParams params;
  const auto env = build_grid_goal(params);
  const auto inv = invariance_of(env);
  EnumerationOptions options;
  options.cap = 1e3;
  CHECK(check_prop1(env.mdp, env.spec, inv, options).status == CheckStatus::kSkipped);
}

TEST_CASE("mutants are detected") {
  const auto trap = build_trap3();
  const auto inv = invariance_of(trap);
  const auto enlarged = mutate_enlarged_omega(trap.mdp, trap.spec, inv);
  REQUIRE(enlarged.has_value());
  // The outside-set check only looks at states outside the set, so the admissible-set check
  // is the one that sees the enlarged set.
  const auto prop = check_prop1(trap.mdp, trap.spec, *enlarged);
  CHECK(prop.status == CheckStatus::kFail);
  CHECK_FALSE(prop.counterexample.is_null());
  CHECK(check_oracle_agreement(trap.mdp, trap.spec, *enlarged).status == CheckStatus::kFail);

  const auto chain = build_chain3();
  const auto filter = build_perfect_filter(invariance_of(chain));
  const auto unsafe = mutate_filter_unsafe(filter);
  REQUIRE(unsafe.has_value());
  const auto result = check_filter(chain.mdp, chain.spec, *unsafe);
  CHECK(result.status == CheckStatus::kFail);
  CHECK(result.counterexample.contains("state"));
  const auto restrictive = mutate_filter_restrictive(filter);
  REQUIRE(restrictive.has_value());
  CHECK(check_filter(chain.mdp, chain.spec, *restrictive).status == CheckStatus::kFail);
}

TEST_CASE("restricting safe actions breaks the admissible-set check") {
  const auto chain = build_chain3();
  auto inv = invariance_of(chain);
  inv.safe_actions[0] = {kChainStay};
  CHECK(check_prop1(chain.mdp, chain.spec, inv).status == CheckStatus::kFail);
}

TEST_CASE("learning check passes on chain3 with five seeds") {
  const auto chain = build_chain3();
  LearningSchedule sched;
  sched.n_steps = 50000;
  const auto result = check_theorem1(chain.mdp, chain.spec, {0, 1, 2, 3, 4}, sched);
  CHECK(result.status == CheckStatus::kPass);
  CHECK(result.max_deviation <= 0.01 * chain.mdp.value_bound());
}

TEST_CASE("learning check fails under an unsafe filter") {
  const auto chain = build_chain3();
  LearningSchedule sched;
  sched.n_steps = 2000;
  Theorem1Options options;
  options.filter_override = mutate_filter_unsafe(build_perfect_filter(invariance_of(chain)));
  const auto result = check_theorem1(chain.mdp, chain.spec, {0}, sched, options);
  CHECK(result.status == CheckStatus::kFail);
  CHECK(result.detail.find("part 1") != std::string::npos);
  CHECK(result.counterexample["seed"] == 0);
}

TEST_CASE("monitor agreement on deterministic grids") {
  const auto env = build_grid_goal(GridGoalParams{});
  const auto inv = invariance_of(env);
  const auto cfg = make_rollout_config(env.mdp, inv, {env.grid->state_of({4, 4})},
                                       env.grid->diameter() + 1);
  const auto result = check_monitor_agreement(env.mdp, env.spec, inv, cfg, true);
  CHECK(result.status == CheckStatus::kPass);
  // A horizon that is too short makes the rollout monitor strictly more conservative.
  const auto short_cfg = make_rollout_config(env.mdp, inv, {env.grid->state_of({4, 4})}, 2);
  CHECK(check_monitor_agreement(env.mdp, env.spec, inv, short_cfg, true).status ==
        CheckStatus::kFail);
  CHECK(check_monitor_agreement(env.mdp, env.spec, inv, short_cfg, false).status ==
        CheckStatus::kPass);
}

TEST_CASE("random instances are valid and reproducible") {
  RngStream a(4);
  RngStream b(4);
  for (int i = 0; i < 100; ++i) {
    const auto ea = random_mdp(a);
    const auto eb = random_mdp(b);
    REQUIRE(validate(ea.mdp).empty());
    REQUIRE(ea.mdp.kernel_table() == eb.mdp.kernel_table());
    REQUIRE(ea.mdp.n_states() <= 12);
    REQUIRE(ea.mdp.n_actions() <= 4);
    const auto failures = ea.spec.failure_set().size();
    REQUIRE(failures >= 1);
    REQUIRE(failures <= ea.mdp.n_states() / 2);
    REQUIRE_FALSE(omega_star_oracle(ea.mdp, ea.spec).empty());
  }
}

TEST_CASE("report json and summary") {
  VerificationReport report;
  report.add(CheckResult{"a", CheckStatus::kPass, 0.5, "", {}});
  report.add(CheckResult{"b", CheckStatus::kSkipped, 0.0, "too big", {}});
  CHECK(report.passed());
  report.add(CheckResult{"c", CheckStatus::kFail, 1.0, "bad", {{"state", 1}}});
  CHECK_FALSE(report.passed());
  CHECK(report.count(CheckStatus::kFail) == 1);
  const auto j = report.to_json();
  CHECK(j.dump().find("\"c\"") != std::string::npos);
  CHECK(report.summary().find("[fail] c") != std::string::npos);
}
