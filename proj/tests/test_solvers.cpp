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
#include "safefilter/errors.hpp"
#include "safefilter/filter.hpp"
#include "safefilter/invariance.hpp"
#include "safefilter/solvers.hpp"

using namespace safefilter;

namespace {

struct Chain {
  Environment env = build_chain3();
  InvarianceResult inv = maximal_invariant_set(env.mdp, env.spec);
  FilteredMdp fmdp = make_filtered_mdp(env.mdp, build_perfect_filter(inv));
};

double max_q_error(const QTable& q, const QTable& ref, const std::vector<State>& states) {
  double err = 0.0;
  for (State s : states) {
    for (Action a = 0; a < q.n_actions(); ++a) {
      err = std::max(err, std::abs(q(s, a) - ref(s, a)));
    }
  }
  return err;
}

}  // namespace

TEST_CASE("value iteration on the filtered chain") {
  const Chain c;
  const auto v = value_iteration(c.fmdp, 1e-12);
  CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(v[1]) <= 1e-10);
  const auto vsc = constrained_value_iteration(c.env.mdp, c.inv, 1e-12);
  CHECK(vsc[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(vsc[1]) <= 1e-10);
}

TEST_CASE("value iteration closed forms") {
  const TabularMdp single(1, 1, {{{0, 1.0}}}, {1.0}, 0.9);
  CHECK(value_iteration(single, 1e-12)[0] == doctest::Approx(10.0).epsilon(1e-10));
  const TabularMdp zero(2, 2, {{{1, 1.0}}, {{0, 1.0}}, {{0, 1.0}}, {{1, 1.0}}}, {0, 0, 0, 0}, 0.5);
  CHECK(value_iteration(zero) == ValueTable{0.0, 0.0});
  CHECK(policy_value(zero, TabularPolicy::uniform(2, 2)) == ValueTable{0.0, 0.0});
  CHECK_THROWS_AS(value_iteration(single, 0.0), PreconditionError);
}

TEST_CASE("constrained value iteration equals plain value iteration without failures") {
  const TabularMdp mdp(2, 2, {{{0, 1.0}}, {{1, 1.0}}, {{0, 0.5}, {1, 0.5}}, {{1, 1.0}}},
                       {0.0, 1.0, 2.0, 0.5}, 0.8);
  const auto inv = maximal_invariant_set(mdp, SafetySpec({1.0, 1.0}));
  const auto a = value_iteration(mdp, 1e-12);
  const auto b = constrained_value_iteration(mdp, inv, 1e-12);
  for (State s = 0; s < 2; ++s) {
    CHECK(a[s] == doctest::Approx(b[s]).epsilon(1e-10));
  }
}

TEST_CASE("greedy policy attains the optimal value") {
  GridGoalParams params;
  params.slip_prob = 0.2;
  const auto env = build_grid_goal(params);
  const auto inv = maximal_invariant_set(env.mdp, env.spec);
  const auto fmdp = make_filtered_mdp(env.mdp, build_perfect_filter(inv));
  const double tol = 1e-10;
  const auto v = value_iteration(fmdp, tol);
  const auto pv = policy_value(fmdp, greedy_policy(fmdp, v), tol);
  for (State s : inv.omega_star) {
    CHECK(std::abs(v[s] - pv[s]) <= 2 * tol);
  }
}

TEST_CASE("policy value of the stay policy on chain3 is zero") {
  const Chain c;
  const auto v = policy_value(c.env.mdp, TabularPolicy::deterministic(2, {0, 0, 0}));
  CHECK(v[0] == 0.0);
  CHECK_THROWS_AS(policy_value(c.env.mdp, TabularPolicy::uniform(2, 2)), SpecError);
}

TEST_CASE("pushforward through the perfect filter") {
  const Chain c;
  const TabularPolicy pi(3, 2, {0.5, 0.5, 0.3, 0.7, 0.5, 0.5});
  const auto exec = pushforward_policy(pi, c.fmdp.filter());
  CHECK(exec.prob(1, 0) == 1.0);
  CHECK(exec.prob(1, 1) == 0.0);
  CHECK(exec.prob(0, 0) == 0.5);
  CHECK(exec.prob(0, 1) == 0.5);
  for (State s = 0; s < 3; ++s) {
    CHECK(exec.prob(s, 0) + exec.prob(s, 1) == doctest::Approx(1.0));
  }
  const auto admissible = TabularPolicy::deterministic(2, {1, 0, 0});
  const auto same = pushforward_policy(admissible, c.fmdp.filter());
  CHECK(same.row(0)[1] == 1.0);
  CHECK(same.row(1)[0] == 1.0);
}

TEST_CASE("learning schedule") {
  LearningSchedule sched;
  sched.n_steps = 1000;
  CHECK(sched.stepsize(0) == 1.0);
  CHECK(sched.stepsize(10) == 0.5);
  CHECK(sched.epsilon(0) == 1.0);
  CHECK(sched.epsilon(400) == doctest::Approx(0.525));
  CHECK(sched.epsilon(800) == doctest::Approx(0.05));
  CHECK(sched.epsilon(1000) == doctest::Approx(0.05));
  CHECK_NOTHROW(sched.validate());
  sched.eps_min = 2.0;
  CHECK_THROWS_AS(sched.validate(), ConfigError);
  sched = LearningSchedule{};
  sched.episode_length = 0;
  CHECK_THROWS_AS(sched.validate(), ConfigError);
}

TEST_CASE("filtered Q-learning on chain3 converges without violations") {
  const Chain c;
  LearningSchedule sched;
  sched.n_steps = 50000;
  RngStream rng(0);
  const auto result = q_learning(c.fmdp, c.env.spec, sched, rng);
  const auto q_star = q_values(c.fmdp, value_iteration(c.fmdp, 1e-12));
  CHECK(max_q_error(result.q, q_star, c.inv.omega_star) <= 0.01);
  CHECK(result.log.back().cumulative_violations == 0);
  CHECK(result.log.back().env_step == 50000);
  CHECK(result.log.size() == 10);
  CHECK(result.policy.epsilon_bound <= 0.01 * c.env.mdp.value_bound());

  const auto exec = pushforward_policy(result.policy.policy, c.fmdp.filter());
  const auto v_exec = policy_value(c.env.mdp, exec, 1e-12);
  const auto v_sc = constrained_value_iteration(c.env.mdp, c.inv, 1e-12);
  for (State s : c.inv.omega_star) {
    CHECK(v_exec[s] >= v_sc[s] - 0.01 * c.env.mdp.value_bound());
  }
}

TEST_CASE("filtered Q-learning is deterministic given the seed") {
  const Chain c;
  LearningSchedule sched;
  sched.n_steps = 5000;
  sched.eval_interval = 1000;
  RngStream a(3);
  RngStream b(3);
  const auto ra = q_learning(c.fmdp, c.env.spec, sched, a);
  const auto rb = q_learning(c.fmdp, c.env.spec, sched, b);
  CHECK(ra.q == rb.q);
  CHECK(ra.log == rb.log);
  CHECK(ra.log.front().seed == 3);
}

TEST_CASE("filtered Q-learning rejects starts outside the safe set") {
  const Chain c;
  LearningSchedule sched;
  sched.n_steps = 10;
  RngStream rng(0);
  TrainingOptions options;
  options.starts = {2};
  CHECK_THROWS_AS(q_learning(c.fmdp, c.env.spec, sched, rng, options), PreconditionError);
  options.starts = {0};
  options.eval_starts = {2};
  CHECK_THROWS_AS(q_learning(c.fmdp, c.env.spec, sched, rng, options), PreconditionError);
}

TEST_CASE("metrics sink sees every logged row") {
  const Chain c;
  LearningSchedule sched;
  sched.n_steps = 3000;
  sched.eval_interval = 1000;
  RngStream rng(1);
  TrainingOptions options;
  MetricsLog seen;
  options.sink = [&](const MetricsRow& row) { seen.push_back(row); };
  const auto result = q_learning(c.fmdp, c.env.spec, sched, rng, options);
  CHECK(seen == result.log);
  CHECK(seen.size() == 3);
}

TEST_CASE("baseline Q-learning violates on chain3 early") {
  const auto env = build_chain3();
  LearningSchedule sched;
  sched.n_steps = 1000;
  sched.eval_interval = 100;
  RngStream rng(0);
  const auto result = baseline_q_learning_terminating(env.mdp, env.spec, sched, rng);
  CHECK(result.log.back().cumulative_violations > 0);
  for (std::size_t i = 1; i < result.log.size(); ++i) {
    CHECK(result.log[i].cumulative_violations >= result.log[i - 1].cumulative_violations);
  }
}

TEST_CASE("baseline without failure states matches plain Q-learning targets") {
  const TabularMdp mdp(1, 1, {{{0, 1.0}}}, {1.0}, 0.9);
  LearningSchedule sched;
  sched.n_steps = 20000;
  RngStream rng(0);
  const auto result = baseline_q_learning_terminating(mdp, SafetySpec({1.0}), sched, rng);
  CHECK(result.q(0, 0) == doctest::Approx(10.0).epsilon(0.01));
  CHECK(result.log.back().cumulative_violations == 0);
}

TEST_CASE("terminating view absorbs failures with zero reward") {
  const auto env = build_chain3();
  const auto view = terminating_view(env.mdp, env.spec);
  CHECK(view.reward(2, 0) == 0.0);
  CHECK(view.reward(1, 1) == 1.0);
  const auto v = value_iteration(view, 1e-12);
  // Moving into the failure state collects 1 and then nothing, so the optimum at s1 is 1.
  CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(v[0] == doctest::Approx(1.9).epsilon(1e-10));
}

TEST_CASE("mean_over") {
  CHECK(mean_over({1.0, 2.0, 6.0}, {0, 2}) == 3.5);
}
