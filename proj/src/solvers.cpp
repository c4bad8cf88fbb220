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

#include "safefilter/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "safefilter/errors.hpp"

namespace safefilter {

namespace {

struct Choice {
  Action action;
  double reward;
  std::span<const Transition> next;
};

/// Flattened planning problem: the states to update and, per state, the available choices.
struct Compiled {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  double discount = 0.0;
  std::vector<State> states;
  std::vector<std::vector<Choice>> choices;
};

Compiled compile(const TabularMdp& mdp) {
  Compiled c{mdp.n_states(), mdp.n_actions(), mdp.discount(), {}, {}};
  c.choices.resize(mdp.n_states());
  for (State s = 0; s < mdp.n_states(); ++s) {
    c.states.push_back(s);
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      c.choices[s].push_back({a, mdp.reward(s, a), mdp.kernel(s, a)});
    }
  }
  return c;
}

Compiled compile(const FilteredMdp& fmdp) {
  Compiled c{fmdp.n_states(), fmdp.n_actions(), fmdp.discount(), fmdp.states(), {}};
  c.choices.resize(fmdp.n_states());
  for (State s : c.states) {
    for (Action a = 0; a < fmdp.n_actions(); ++a) {
      c.choices[s].push_back({a, fmdp.reward(s, a), fmdp.kernel(s, a)});
    }
  }
  return c;
}

Compiled compile_constrained(const TabularMdp& mdp, const InvarianceResult& inv) {
  if (inv.n_states() != mdp.n_states()) {
    throw SpecError("invariance result does not match the MDP");
  }
  Compiled c{mdp.n_states(), mdp.n_actions(), mdp.discount(), inv.omega_star, {}};
  c.choices.resize(mdp.n_states());
  for (State s : c.states) {
    for (Action a : inv.safe_actions[s]) {
      c.choices[s].push_back({a, mdp.reward(s, a), mdp.kernel(s, a)});
    }
  }
  return c;
}

double backup(const Choice& choice, double discount, const ValueTable& v) {
  double expected = 0.0;
  for (const auto& t : choice.next) {
    expected += t.prob * v[t.next];
  }
  return choice.reward + discount * expected;
}

double stop_threshold(double tol, double discount) {
  if (!(tol > 0.0)) {
    throw PreconditionError("planning tolerance must be positive");
  }
  return tol * (1.0 - discount) / discount;
}

ValueTable optimal_values(const Compiled& c, double tol) {
  const double threshold = stop_threshold(tol, c.discount);
  ValueTable v(c.n_states, 0.0);
  ValueTable next(c.n_states, 0.0);
  while (true) {
    double residual = 0.0;
    for (State s : c.states) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& choice : c.choices[s]) {
        best = std::max(best, backup(choice, c.discount, v));
      }
      next[s] = best;
      residual = std::max(residual, std::abs(best - v[s]));
    }
    v.swap(next);
    if (residual <= threshold) {
      return v;
    }
  }
}

ValueTable evaluate(const Compiled& c, const TabularPolicy& policy, double tol) {
  if (policy.n_states() != c.n_states || policy.n_actions() != c.n_actions) {
    throw SpecError("policy dimensions do not match the model");
  }
  const double threshold = stop_threshold(tol, c.discount);
  ValueTable v(c.n_states, 0.0);
  ValueTable next(c.n_states, 0.0);
  while (true) {
    double residual = 0.0;
    for (State s : c.states) {
      double total = 0.0;
      for (const auto& choice : c.choices[s]) {
        const double p = policy.prob(s, choice.action);
        if (p > 0.0) {
          total += p * backup(choice, c.discount, v);
        }
      }
      next[s] = total;
      residual = std::max(residual, std::abs(total - v[s]));
    }
    v.swap(next);
    if (residual <= threshold) {
      return v;
    }
  }
}

TabularPolicy greedy(const Compiled& c, const ValueTable& v) {
  std::vector<Action> actions(c.n_states, 0);
  for (State s : c.states) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& choice : c.choices[s]) {
      const double q = backup(choice, c.discount, v);
      if (q > best) {
        best = q;
        actions[s] = choice.action;
      }
    }
  }
  return TabularPolicy::deterministic(c.n_actions, actions);
}

QTable q_from(const Compiled& c, const ValueTable& v) {
  QTable q(c.n_states, c.n_actions);
  for (State s : c.states) {
    for (const auto& choice : c.choices[s]) {
      q(s, choice.action) = backup(choice, c.discount, v);
    }
  }
  return q;
}

}  // namespace

ValueTable value_iteration(const TabularMdp& mdp, double tol) {
  return optimal_values(compile(mdp), tol);
}

ValueTable value_iteration(const FilteredMdp& fmdp, double tol) {
  return optimal_values(compile(fmdp), tol);
}

ValueTable constrained_value_iteration(const TabularMdp& mdp, const InvarianceResult& inv,
                                       double tol) {
  if (inv.empty()) {
    throw SynthesisError("empty safe set: constrained problem has no admissible policy");
  }
  return optimal_values(compile_constrained(mdp, inv), tol);
}

ValueTable policy_value(const TabularMdp& mdp, const TabularPolicy& policy, double tol) {
  return evaluate(compile(mdp), policy, tol);
}

ValueTable policy_value(const FilteredMdp& fmdp, const TabularPolicy& policy, double tol) {
  return evaluate(compile(fmdp), policy, tol);
}

TabularPolicy greedy_policy(const TabularMdp& mdp, const ValueTable& values) {
  return greedy(compile(mdp), values);
}

TabularPolicy greedy_policy(const FilteredMdp& fmdp, const ValueTable& values) {
  return greedy(compile(fmdp), values);
}

TabularPolicy greedy_policy(const QTable& q) {
  std::vector<Action> actions(q.n_states());
  for (State s = 0; s < q.n_states(); ++s) {
    actions[s] = q.greedy(s);
  }
  return TabularPolicy::deterministic(q.n_actions(), actions);
}

QTable q_values(const TabularMdp& mdp, const ValueTable& values) {
  return q_from(compile(mdp), values);
}

QTable q_values(const FilteredMdp& fmdp, const ValueTable& values) {
  return q_from(compile(fmdp), values);
}

TabularMdp terminating_view(const TabularMdp& mdp, const SafetySpec& spec) {
  require_matching(mdp, spec);
  auto kernel = mdp.kernel_table();
  auto rewards = mdp.reward_table();
  for (State s : spec.failure_set()) {
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      kernel[s * mdp.n_actions() + a] = {Transition{s, 1.0}};
      rewards[s * mdp.n_actions() + a] = 0.0;
    }
  }
  return TabularMdp(mdp.n_states(), mdp.n_actions(), std::move(kernel), std::move(rewards),
                    mdp.discount());
}

TabularPolicy pushforward_policy(const TabularPolicy& policy, const SafetyFilter& filter) {
  if (policy.n_states() != filter.n_states() || policy.n_actions() != filter.n_actions()) {
    throw SpecError("pushforward: policy dimensions do not match the filter");
  }
  const std::size_t n_actions = policy.n_actions();
  std::vector<double> probs = policy.table();
  for (State s : filter.invariance().omega_star) {
    std::vector<double> pushed(n_actions, 0.0);
    for (Action a = 0; a < n_actions; ++a) {
      pushed[filter.apply(s, a)] += policy.prob(s, a);
    }
    std::copy(pushed.begin(), pushed.end(), probs.begin() + s * n_actions);
  }
  return TabularPolicy(policy.n_states(), n_actions, std::move(probs));
}

double LearningSchedule::stepsize(std::size_t visits) const {
  return stepsize_c / (stepsize_c + static_cast<double>(visits));
}

double LearningSchedule::epsilon(std::size_t step) const {
  const double decay_steps = eps_decay_fraction * static_cast<double>(n_steps);
  if (decay_steps <= 0.0) {
    return eps_min;
  }
  const double progress = std::min(1.0, static_cast<double>(step) / decay_steps);
  return eps0 + (eps_min - eps0) * progress;
}

void LearningSchedule::validate() const {
  if (n_steps == 0) {
    throw ConfigError("n_steps must be positive");
  }
  if (!(stepsize_c > 0.0)) {
    throw ConfigError("stepsize_c must be positive");
  }
  if (!(eps_min >= 0.0 && eps_min <= eps0 && eps0 <= 1.0)) {
    throw ConfigError("exploration rates must satisfy 0 <= eps_min <= eps0 <= 1");
  }
  if (!(eps_decay_fraction >= 0.0 && eps_decay_fraction <= 1.0)) {
    throw ConfigError("eps_decay_fraction must lie in [0, 1]");
  }
  if (episode_length == 0 || eval_interval == 0) {
    throw ConfigError("episode_length and eval_interval must be positive");
  }
}

double mean_over(const ValueTable& values, const std::vector<State>& states) {
  if (states.empty()) {
    return 0.0;
  }
  double total = 0.0;
  for (State s : states) {
    total += values.at(s);
  }
  return total / static_cast<double>(states.size());
}

namespace {

struct StepOutcome {
  State next;
  double reward;
  bool intervened;
};

/// Shared epsilon-greedy loop. `step_env` executes a proposed action and reports the executed
/// reward, successor and whether the filter intervened; `evaluate_greedy` returns the exact
/// evaluation return of a greedy policy.
struct Transcript {
  QTable q;
  MetricsLog log;
};

template <typename StepEnv, typename EvaluateGreedy>
Transcript run_q_learning(std::size_t n_states, std::size_t n_actions, double discount,
                          const SafetySpec& spec, const std::vector<State>& starts,
                          const LearningSchedule& sched, RngStream& rng,
                          const TrainingOptions& options, StepEnv step_env, EvaluateGreedy evaluate_greedy) {
  QTable q(n_states, n_actions);
  std::vector<std::size_t> visits(n_states * n_actions, 0);
  MetricsLog log;

  std::uint64_t violations = 0;
  std::uint64_t interventions = 0;
  double window_return_sum = 0.0;
  std::size_t window_episodes = 0;
  double last_train_return = 0.0;

  State s = starts[rng.uniform_index(starts.size())];
  std::size_t episode_step = 0;
  double episode_return = 0.0;
  double discount_power = 1.0;

  const auto finish_episode = [&]() {
    window_return_sum += episode_return;
    ++window_episodes;
    s = starts[rng.uniform_index(starts.size())];
    episode_step = 0;
    episode_return = 0.0;
    discount_power = 1.0;
  };

  for (std::size_t step = 1; step <= sched.n_steps; ++step) {
    Action a = 0;
    if (rng.uniform() < sched.epsilon(step - 1)) {
      a = rng.uniform_index(n_actions);
    } else {
      a = q.greedy(s);
    }
    const auto outcome = step_env(s, a, rng);
    if (outcome.intervened) {
      ++interventions;
    }
    const bool failed = spec.is_failure(outcome.next);
    double target = outcome.reward;
    if (!failed) {
      target += discount * q.max(outcome.next);
    }
    const std::size_t idx = s * n_actions + a;
    q(s, a) += sched.stepsize(visits[idx]) * (target - q(s, a));
    ++visits[idx];

    episode_return += discount_power * outcome.reward;
    discount_power *= discount;
    ++episode_step;
    if (failed) {
      ++violations;
      finish_episode();
    } else if (episode_step >= sched.episode_length) {
      finish_episode();
    } else {
      s = outcome.next;
    }

    if (step % sched.eval_interval == 0 || step == sched.n_steps) {
      if (window_episodes > 0) {
        last_train_return = window_return_sum / static_cast<double>(window_episodes);
      }
      window_return_sum = 0.0;
      window_episodes = 0;
      MetricsRow row{step,       last_train_return, evaluate_greedy(greedy_policy(q)),
                     violations, interventions,     rng.seed()};
      if (options.sink) {
        options.sink(row);
      }
      log.push_back(row);
    }
  }
  return {std::move(q), std::move(log)};
}

}  // namespace

QLearningResult q_learning(const FilteredMdp& fmdp, const SafetySpec& spec,
                           const LearningSchedule& sched, RngStream& rng,
                           const TrainingOptions& options) {
  sched.validate();
  require_matching(fmdp.base(), spec);
  const auto starts = options.starts.empty() ? fmdp.states() : options.starts;
  for (State s0 : starts) {
    if (!fmdp.in_domain(s0)) {
      throw PreconditionError("episode start " + std::to_string(s0) +
                              " lies outside the safe set");
    }
  }
  const TabularMdp& base = fmdp.base();
  const SafetyFilter& filter = fmdp.filter();
  auto step_env = [&](State s, Action a, RngStream& r) {
    const auto decision = filter.decide(s, a);
    return StepOutcome{sample_transition(base, s, decision.action, r),
                       base.reward(s, decision.action), decision.intervened};
  };
  const auto& eval_starts = options.eval_starts.empty() ? starts : options.eval_starts;
  for (State s0 : eval_starts) {
    if (!fmdp.in_domain(s0)) {
      throw PreconditionError("evaluation start " + std::to_string(s0) +
                              " lies outside the safe set");
    }
  }
  auto evaluate_greedy = [&](const TabularPolicy& pi) {
    return mean_over(policy_value(fmdp, pi, options.eval_tol), eval_starts);
  };
  auto transcript =
      run_q_learning(fmdp.n_states(), fmdp.n_actions(), fmdp.discount(), spec, starts, sched,
                     rng, options, step_env, evaluate_greedy);

  auto policy = greedy_policy(transcript.q);
  const auto optimal = value_iteration(fmdp, options.certify_tol);
  const auto achieved = policy_value(fmdp, policy, options.certify_tol);
  double epsilon = 0.0;
  for (State s : fmdp.states()) {
    epsilon = std::max(epsilon, optimal[s] - achieved[s]);
  }
  return {std::move(transcript.q), EpsOptimalPolicy{std::move(policy), epsilon},
          std::move(transcript.log)};
}

BaselineResult baseline_q_learning_terminating(const TabularMdp& mdp, const SafetySpec& spec,
                                               const LearningSchedule& sched, RngStream& rng,
                                               const TrainingOptions& options) {
  sched.validate();
  require_matching(mdp, spec);
  std::vector<State> starts = options.starts;
  if (starts.empty()) {
    for (State s = 0; s < mdp.n_states(); ++s) {
      if (!spec.is_failure(s)) {
        starts.push_back(s);
      }
    }
  }
  const TabularMdp eval_model = terminating_view(mdp, spec);
  auto step_env = [&](State s, Action a, RngStream& r) {
    return StepOutcome{sample_transition(mdp, s, a, r), mdp.reward(s, a), false};
  };
  const auto& eval_starts = options.eval_starts.empty() ? starts : options.eval_starts;
  for (State s0 : eval_starts) {
    mdp.check_state(s0);
  }
  auto evaluate_greedy = [&](const TabularPolicy& pi) {
    return mean_over(policy_value(eval_model, pi, options.eval_tol), eval_starts);
  };
  auto transcript = run_q_learning(mdp.n_states(), mdp.n_actions(), mdp.discount(), spec,
                                   starts, sched, rng, options, step_env, evaluate_greedy);
  auto policy = greedy_policy(transcript.q);
  return {std::move(transcript.q), std::move(policy), std::move(transcript.log)};
}

}  // namespace safefilter
