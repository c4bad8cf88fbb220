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

#include <span>
#include <vector>

#include "safefilter/invariance.hpp"
#include "safefilter/mdp.hpp"

namespace safefilter {

struct FilterDecision {
  Action action;
  bool intervened;
};

/// Action override map phi(s, a), defined on the Omega* of the invariance result it was
/// built from. The rule table holds one row of n_actions entries per Omega* state and an
/// empty row everywhere else. Construction checks structure only; PerfectFilter adds the
/// least-restrictive guarantees.
class SafetyFilter {
 public:
  SafetyFilter(InvarianceResult inv, std::vector<std::vector<Action>> override_rule);

  const InvarianceResult& invariance() const { return inv_; }
  const std::vector<std::vector<Action>>& override_rule() const { return rule_; }
  std::size_t n_states() const { return inv_.n_states(); }
  std::size_t n_actions() const { return inv_.n_actions(); }
  bool in_domain(State s) const { return inv_.contains(s); }

  /// phi(s, a); throws OutOfEnvelopeError when s is outside Omega*.
  Action apply(State s, Action a) const;
  FilterDecision decide(State s, Action a) const;

 private:
  InvarianceResult inv_;
  std::vector<std::vector<Action>> rule_;
};

/// Filter that keeps every safe action and sends every unsafe one into the safe set.
class PerfectFilter : public SafetyFilter {
 public:
  /// Throws SpecError if either defining clause fails for some (s, a) on Omega*.
  PerfectFilter(InvarianceResult inv, std::vector<std::vector<Action>> override_rule);
};

/// Overrides unsafe actions with the fallback. Throws SynthesisError on an empty Omega*.
PerfectFilter build_perfect_filter(const InvarianceResult& inv);

FilterDecision filter_apply(const SafetyFilter& filter, State s, Action a);

/// Base MDP composed with a filter, restricted to Omega*: P_phi(.|s,a) = P(.|s, phi(s,a))
/// and r_phi(s,a) = r(s, phi(s,a)).
class FilteredMdp {
 public:
  FilteredMdp(TabularMdp base, SafetyFilter filter);

  const TabularMdp& base() const { return base_; }
  const SafetyFilter& filter() const { return filter_; }
  const std::vector<State>& states() const { return filter_.invariance().omega_star; }
  bool in_domain(State s) const { return filter_.in_domain(s); }

  std::size_t n_states() const { return base_.n_states(); }
  std::size_t n_actions() const { return base_.n_actions(); }
  double discount() const { return base_.discount(); }

  std::span<const Transition> kernel(State s, Action a) const;
  double reward(State s, Action a) const;

 private:
  TabularMdp base_;
  SafetyFilter filter_;
};

/// Throws SpecError if the filter does not fit the MDP's dimensions.
FilteredMdp make_filtered_mdp(const TabularMdp& mdp, const SafetyFilter& filter);

/// Safe iff every successor of (s, a) has safety value >= margin. The default margin 0
/// makes the monitor exact. Throws OutOfEnvelopeError for s outside Omega*.
bool value_monitor(const InvarianceResult& inv, const TabularMdp& mdp, State s, Action a,
                   double margin = 0.0);

struct RolloutMonitorConfig {
  std::size_t horizon = 100;
  /// l(s); states with l(s) >= 0 are terminal-safe.
  std::vector<double> target_margin;
  /// Deterministic fallback used after the proposed action.
  TabularPolicy stop_policy;
};

/// Throws ConfigError if the horizon is zero, dimensions disagree, the stop policy is not
/// deterministic, or the terminal-safe set {l >= 0} minus F is not closed under it.
void validate_rollout_config(const TabularMdp& mdp, const SafetySpec& spec,
                             const RolloutMonitorConfig& cfg);

/// Rollout monitor with the worst case over the full support tree precomputed.
///
/// A visited state is accepted when it is terminal-safe; it is rejected when it is a failure
/// state or when the horizon runs out first. The proposed action is the first step and the
/// stop policy supplies the remaining horizon - 1 steps.
class RolloutMonitor {
 public:
  RolloutMonitor(const TabularMdp& mdp, const SafetySpec& spec, RolloutMonitorConfig cfg);

  /// Throws PreconditionError if s is a failure state.
  bool check(State s, Action a) const;

  const RolloutMonitorConfig& config() const { return cfg_; }

 private:
  TabularMdp mdp_;
  std::vector<char> failure_;
  RolloutMonitorConfig cfg_;
  /// reaches_[x]: every branch from x hits {l >= 0} before F within horizon - 1 steps.
  std::vector<char> reaches_;
};

bool rollout_monitor(const TabularMdp& mdp, const SafetySpec& spec,
                     const RolloutMonitorConfig& cfg, State s, Action a);

/// Rollout configuration targeting `targets` (which must be stop-safe states of Omega*).
///
/// l(s) = +1 on targets and -1 elsewhere. On a target the stop policy plays the lowest safe
/// action that cannot leave the target set; elsewhere it plays the safe action that shortens the worst-case number of
/// steps to the targets. With `horizon` = 0 the horizon is set to that worst-case distance
/// over Omega* plus one.
RolloutMonitorConfig make_rollout_config(const TabularMdp& mdp, const InvarianceResult& inv,
                                         const std::vector<State>& targets,
                                         std::size_t horizon = 0);

/// States of Omega* with a safe self-loop action (a one-step stop).
std::vector<State> stop_safe_states(const TabularMdp& mdp, const InvarianceResult& inv);

/// phi(s, a) = a when the monitor accepts (s, a), inv.fallback(s) otherwise.
SafetyFilter build_value_monitor_filter(const TabularMdp& mdp, const InvarianceResult& inv,
                                        double margin = 0.0);
SafetyFilter build_rollout_monitor_filter(const InvarianceResult& inv,
                                          const RolloutMonitor& monitor);

}  // namespace safefilter
