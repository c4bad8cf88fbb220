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

#include <cstdint>
#include <functional>
#include <vector>

#include "safefilter/filter.hpp"
#include "safefilter/invariance.hpp"
#include "safefilter/mdp.hpp"
#include "safefilter/rng.hpp"

namespace safefilter {

inline constexpr double kDefaultPlanningTol = 1e-10;

// Planning. Every solver returns a table over all states of the underlying model; states
// outside the solver's domain (Omega* for filtered and constrained problems) hold 0.
// Iteration stops once ||T V - V||_inf <= tol (1 - gamma) / gamma, so the result is within
// tol of the exact fixed point.

ValueTable value_iteration(const TabularMdp& mdp, double tol = kDefaultPlanningTol);
ValueTable value_iteration(const FilteredMdp& fmdp, double tol = kDefaultPlanningTol);

/// Optimal value over the admissible policy set: the Bellman max runs over safe actions only.
/// Throws SynthesisError on an empty Omega*.
ValueTable constrained_value_iteration(const TabularMdp& mdp, const InvarianceResult& inv,
                                       double tol = kDefaultPlanningTol);

ValueTable policy_value(const TabularMdp& mdp, const TabularPolicy& policy,
                        double tol = kDefaultPlanningTol);
ValueTable policy_value(const FilteredMdp& fmdp, const TabularPolicy& policy,
                        double tol = kDefaultPlanningTol);

/// Greedy deterministic policy with lowest-index tie-breaking.
TabularPolicy greedy_policy(const TabularMdp& mdp, const ValueTable& values);
TabularPolicy greedy_policy(const FilteredMdp& fmdp, const ValueTable& values);
TabularPolicy greedy_policy(const QTable& q);

/// Q(s,a) = r(s,a) + gamma * E[V(s')]; rows outside the domain are 0.
QTable q_values(const TabularMdp& mdp, const ValueTable& values);
QTable q_values(const FilteredMdp& fmdp, const ValueTable& values);

/// Copy of `mdp` in which every failure state is absorbing with zero reward, i.e. the
/// episode-termination semantics of the unfiltered baseline.
TabularMdp terminating_view(const TabularMdp& mdp, const SafetySpec& spec);

/// pi_exec(b|s) = sum over {a : phi(s,a) = b} of pi(a|s) on Omega*; other rows are copied.
TabularPolicy pushforward_policy(const TabularPolicy& policy, const SafetyFilter& filter);

struct LearningSchedule {
  std::size_t n_steps = 200000;
  double stepsize_c = 10.0;
  double eps0 = 1.0;
  double eps_min = 0.05;
  double eps_decay_fraction = 0.8;
  std::size_t episode_length = 10;
  std::size_t eval_interval = 5000;

  /// alpha = c / (c + visits), visits counted before the update.
  double stepsize(std::size_t visits) const;
  /// Linear decay from eps0 to eps_min over eps_decay_fraction * n_steps steps.
  double epsilon(std::size_t step) const;
  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

struct MetricsRow {
  std::size_t env_step = 0;
  double episodic_return_train = 0.0;
  double episodic_return_eval = 0.0;
  std::uint64_t cumulative_violations = 0;
  std::uint64_t cumulative_interventions = 0;
  std::uint64_t seed = 0;

  bool operator==(const MetricsRow&) const = default;
};

using MetricsLog = std::vector<MetricsRow>;
using MetricsSink = std::function<void(const MetricsRow&)>;

struct TrainingOptions {
  /// Episode starts, drawn uniformly. Empty means Omega* for filtered training and the
  /// non-failure states for the baseline.
  std::vector<State> starts;
  /// States the evaluation return is averaged over. Empty means the start set.
  std::vector<State> eval_starts;
  /// Tolerance of the exact evaluation run at every eval_interval.
  double eval_tol = 1e-9;
  /// Tolerance of the planning runs used for the a-posteriori certificate.
  double certify_tol = kDefaultPlanningTol;
  MetricsSink sink;
};

struct EpsOptimalPolicy {
  TabularPolicy policy;
  /// max over Omega* of V*(s) - V^pi(s) on the model the policy was trained in, clamped at 0.
  double epsilon_bound = 0.0;
};

struct QLearningResult {
  QTable q;
  EpsOptimalPolicy policy;
  MetricsLog log;
};

/// Tabular epsilon-greedy Q-learning inside the filtered MDP.
///
/// The agent updates the action it proposed; the environment executes phi(s, a). Episodes last
/// episode_length steps and restart uniformly from the start set. Entering the failure set
/// counts as a violation and ends the episode. Metrics rows are emitted every eval_interval
/// steps and at the final step; the evaluation return is the exact expected discounted
/// return of the current greedy policy averaged over the evaluation start set.
/// Throws PreconditionError if a start state lies outside Omega*.
QLearningResult q_learning(const FilteredMdp& fmdp, const SafetySpec& spec,
                           const LearningSchedule& sched, RngStream& rng,
                           const TrainingOptions& options = {});

struct BaselineResult {
  QTable q;
  TabularPolicy policy;
  MetricsLog log;
};

/// Unfiltered Q-learning on the raw MDP; entering the failure set ends the episode and the
/// update target is the immediate reward alone. Evaluation uses terminating_view().
BaselineResult baseline_q_learning_terminating(const TabularMdp& mdp, const SafetySpec& spec,
                                               const LearningSchedule& sched, RngStream& rng,
                                               const TrainingOptions& options = {});

/// Mean of values[s] over `states`.
double mean_over(const ValueTable& values, const std::vector<State>& states);

}  // namespace safefilter
