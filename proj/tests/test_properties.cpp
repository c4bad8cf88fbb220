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

#include "safefilter/envs.hpp"
#include "safefilter/filter.hpp"
#include "safefilter/invariance.hpp"
#include "safefilter/solvers.hpp"
#include "safefilter/verify.hpp"

using namespace safefilter;

namespace {

TabularPolicy random_policy(std::size_t n_states, std::size_t n_actions, RngStream& rng) {
  std::vector<double> probs(n_states * n_actions);
  for (State s = 0; s < n_states; ++s) {
    double total = 0.0;
    for (Action a = 0; a < n_actions; ++a) {
      const double w = rng.uniform_index(3) == 0 ? 0.0 : rng.uniform() + 1e-3;
      probs[s * n_actions + a] = w;
      total += w;
    }
    if (total == 0.0) {
      probs[s * n_actions] = total = 1.0;
    }
    for (Action a = 0; a < n_actions; ++a) {
      probs[s * n_actions + a] /= total;
    }
  }
  return TabularPolicy(n_states, n_actions, std::move(probs));
}

}  // namespace

TEST_CASE("safety value is a fixed point of the worst-case operator") {
  RngStream rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto env = random_mdp(rng);
    const auto value = compute_safety_value(env.mdp, env.spec);
    for (State s = 0; s < env.mdp.n_states(); ++s) {
      double best = -INFINITY;
      for (Action a = 0; a < env.mdp.n_actions(); ++a) {
        double worst = INFINITY;
        for (const auto& t : env.mdp.kernel(s, a)) {
          worst = std::min(worst, value[t.next]);
        }
        best = std::max(best, worst);
      }
      REQUIRE(value[s] == std::min(env.spec.margin()[s], best));
    }
  }
}

TEST_CASE("invariance agrees with the removal oracle and is closed") {
  RngStream rng(22);
  for (int i = 0; i < 300; ++i) {
    const auto env = random_mdp(rng);
    const auto inv = maximal_invariant_set(env.mdp, env.spec);
    REQUIRE(inv.omega_star == omega_star_oracle(env.mdp, env.spec));
    for (State s : inv.omega_star) {
      REQUIRE_FALSE(env.spec.is_failure(s));
      REQUIRE_FALSE(inv.safe_actions[s].empty());
      for (Action a : inv.safe_actions[s]) {
        for (const auto& t : env.mdp.kernel(s, a)) {
          REQUIRE(inv.contains(t.next));
        }
      }
    }
  }
}

TEST_CASE("value equality under pushforward for random policies") {
  RngStream rng(23);
  const double tol = 1e-11;
  for (int i = 0; i < 10; ++i) {
    const auto env = random_mdp(rng);
    const auto inv = maximal_invariant_set(env.mdp, env.spec);
    const auto fmdp = make_filtered_mdp(env.mdp, build_perfect_filter(inv));
    for (int k = 0; k < 100; ++k) {
      const auto pi = random_policy(env.mdp.n_states(), env.mdp.n_actions(), rng);
      const auto filtered = policy_value(fmdp, pi, tol);
      const auto exec = pushforward_policy(pi, fmdp.filter());
      REQUIRE(is_admissible(exec, inv));
      const auto direct = policy_value(env.mdp, exec, tol);
      for (State s : inv.omega_star) {
        REQUIRE(std::abs(filtered[s] - direct[s]) <= 2 * tol);
      }
    }
  }
}

TEST_CASE("filtered optimum equals constrained optimum on random instances") {
  RngStream rng(24);
  for (int i = 0; i < 100; ++i) {
    const auto env = random_mdp(rng);
    const auto inv = maximal_invariant_set(env.mdp, env.spec);
    REQUIRE(check_value_equality(env.mdp, inv).status == CheckStatus::kPass);
  }
}

TEST_CASE("admissible policies never reach the failure set from the safe set") {
  RngStream rng(25);
  for (int i = 0; i < 50; ++i) {
    const auto env = random_mdp(rng);
    const auto inv = maximal_invariant_set(env.mdp, env.spec);
    const auto exec = pushforward_policy(
        random_policy(env.mdp.n_states(), env.mdp.n_actions(), rng), build_perfect_filter(inv));
    const auto h = hitting_probabilities(env.mdp, env.spec, exec);
    for (State s : inv.omega_star) {
      REQUIRE(h[s] == 0.0);
    }
  }
}

TEST_CASE("sampled transitions stay in the support") {
  RngStream rng(26);
  const auto env = random_mdp(rng);
  for (int i = 0; i < 20000; ++i) {
    const State s = rng.uniform_index(env.mdp.n_states());
    const Action a = rng.uniform_index(env.mdp.n_actions());
    const auto next = sample_transition(env.mdp, s, a, rng);
    const auto supp = support(env.mdp, s, a);
    REQUIRE(std::find(supp.begin(), supp.end(), next) != supp.end());
  }
}

TEST_CASE("more slip never adds safe actions") {
  GridGoalParams params = default_goal_params(8, 8, 0.0);
  std::vector<InvarianceResult> results;
  for (double slip : {0.0, 0.1, 0.2, 0.3}) {
    params.slip_prob = slip;
    const auto env = build_grid_goal(params);
    results.push_back(maximal_invariant_set(env.mdp, env.spec));
  }
  for (std::size_t k = 1; k < results.size(); ++k) {
    for (State s : results[k].omega_star) {
      REQUIRE(results[k - 1].contains(s));
      for (Action a : results[k].safe_actions[s]) {
        REQUIRE(results[k - 1].is_safe_action(s, a));
      }
    }
  }
}

TEST_CASE("filtered learning on random instances never violates") {
  RngStream rng(27);
  LearningSchedule sched;
  sched.n_steps = 2000;
  sched.eval_interval = 1000;
  for (int i = 0; i < 20; ++i) {
    const auto env = random_mdp(rng);
    const auto inv = maximal_invariant_set(env.mdp, env.spec);
    const auto fmdp = make_filtered_mdp(env.mdp, build_perfect_filter(inv));
    RngStream learner = rng.split(static_cast<std::uint64_t>(i));
    const auto result = q_learning(fmdp, env.spec, sched, learner);
    REQUIRE(result.log.back().cumulative_violations == 0);
    REQUIRE(result.policy.epsilon_bound >= 0.0);
  }
}
